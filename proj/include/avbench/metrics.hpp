#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avbench/mocap_io.hpp"
#include "avbench/skeleton.hpp"

namespace avbench {

/// Joint membership of a body subset. Low is hips, knees, ankles and feet
/// (8 joints on the SMPL tree); Up is every other joint, pelvis and spine
/// included; Full is all joints.
struct BodySubset {
  BodySubsetLabel label = BodySubsetLabel::kFull;
  std::vector<std::size_t> joints;

  static BodySubset of(BodySubsetLabel label, const Skeleton& skeleton);
};

bool is_lower_body_joint(std::string_view joint_name);

enum class RotationSpace { kLocal, kGlobal };

/// Mean joint position error in cm over frames and subset joints.
double mpjpe(const MotionClip& pred, const MotionClip& gt, const BodySubset& subset);
/// Mean geodesic angle in degrees between corresponding rotations.
double mpjre(const MotionClip& pred, const MotionClip& gt, const BodySubset& subset,
             RotationSpace space = RotationSpace::kLocal);
/// Mean joint velocity error in cm/s over frames t >= 1.
double mpjve(const MotionClip& pred, const MotionClip& gt, const BodySubset& subset);

using PositionSequence = std::vector<std::vector<Vec3>>;

double mpjpe_positions(const PositionSequence& pred, const PositionSequence& gt, const std::vector<std::size_t>& joints);
double mpjve_positions(const PositionSequence& pred, const PositionSequence& gt, double framerate_hz,
                       const std::vector<std::size_t>& joints);

/// Per-joint error sums for one or more clips. Subset means are built from
/// these sums, so Full = (|Up| Up + |Low| Low) / joint_count up to rounding.
class ErrorAccumulator {
 public:
  explicit ErrorAccumulator(std::size_t joint_count = kSmplJointCount);

  /// Adds every frame of a prediction/ground-truth pair. Throws
  /// StructuralError on length, skeleton or framerate mismatch.
  void add_clip(const MotionClip& pred, const MotionClip& gt, RotationSpace space = RotationSpace::kLocal);
  void merge(const ErrorAccumulator& other);

  struct Metrics {
    double mpjpe_cm = 0.0;
    double mpjre_deg = 0.0;
    double mpjve_cmps = 0.0;
  };
  Metrics subset_metrics(const BodySubset& subset) const;

  std::size_t frames() const { return frames_; }
  std::size_t velocity_frames() const { return velocity_frames_; }
  /// Sums over frames, per joint: position error (m), angle (deg), velocity error (m/s).
  const std::vector<double>& position_sums() const { return pos_; }
  const std::vector<double>& rotation_sums() const { return rot_; }
  const std::vector<double>& velocity_sums() const { return vel_; }

 private:
  std::vector<double> pos_, rot_, vel_;
  std::size_t frames_ = 0;
  std::size_t velocity_frames_ = 0;
};

// ---------------------------------------------------------------------------
// reports

struct ResultRow {
  std::string condition;
  std::optional<double> level;
  std::string reconstructor;
  BodySubsetLabel subset = BodySubsetLabel::kUp;
  double mpjpe_cm = 0.0;
  double mpjre_deg = 0.0;
  double mpjve_cmps = 0.0;
  /// Mean sparse-to-cartesian staleness; shown in the markdown report only.
  double mean_staleness_ms = 0.0;
};

struct ReportRow {
  ResultRow result;
  std::string reference_model;  // empty when no reference row matched
  std::optional<double> delta_mpjpe;
  std::optional<double> delta_mpjre;
  std::optional<double> delta_mpjve;
};

struct MetricsReport {
  std::vector<ReportRow> rows;
  std::map<std::string, std::string> metadata;
};

/// Reference condition label a result condition is compared against ("clean" -> "gt_cart").
std::string reference_condition(const std::string& condition);

/// Strict weak order on (condition, level, subset, reconstructor); missing
/// levels first, Up before Low before Full.
bool report_key_less(const ResultRow& a, const ResultRow& b);
bool same_report_key(const ResultRow& a, const ResultRow& b);

/// Sorts results and, when a reference table is given, attaches measured minus
/// reference deltas from the row of `reference_model` with the same key.
MetricsReport build_report(std::vector<ResultRow> results, const ReferenceTable* reference = nullptr,
                           const std::string& reference_model = "avatarposer");

inline constexpr const char* kReportCsvHeader =
    "condition,level,model,subset,mpjpe,mpjre,mpjve,reference_model,delta_mpjpe,delta_mpjre,delta_mpjve";

/// Metrics are written with 4 decimals, levels in shortest round-trip form.
std::string report_to_csv(const MetricsReport& report);
std::string report_to_markdown(const MetricsReport& report);
/// Reads a report CSV back (metrics only; delta columns are recomputed on merge).
std::vector<ResultRow> parse_report_csv(std::string_view csv_text);

/// Union of result sets keyed by (condition, level, subset, reconstructor).
/// Identical duplicates collapse; conflicting ones raise Error listing every key.
std::vector<ResultRow> merge_results(const std::vector<std::vector<ResultRow>>& sets);

std::string format_level(std::optional<double> level);

}  // namespace avbench
