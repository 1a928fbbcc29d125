#include "avbench/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "avbench/error.hpp"

namespace avbench {

namespace {

constexpr std::array<std::string_view, 8> kLowerBody = {"left_hip",   "right_hip",   "left_knee", "right_knee",
                                                        "left_ankle", "right_ankle", "left_foot", "right_foot"};

void check_pair(const MotionClip& pred, const MotionClip& gt) {
  if (pred.frame_count() != gt.frame_count()) {
    throw StructuralError("prediction has " + std::to_string(pred.frame_count()) + " frames, ground truth " +
                          std::to_string(gt.frame_count()));
  }
  if (pred.skeleton().size() != gt.skeleton().size()) throw StructuralError("prediction and ground truth skeletons differ");
}

void check_sequences(const PositionSequence& pred, const PositionSequence& gt) {
  if (pred.size() != gt.size()) throw StructuralError("position sequences differ in length");
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (pred[t].size() != gt[t].size()) throw StructuralError("position sequences differ in joint count");
  }
}

double subset_mean(const std::vector<double>& per_joint_sum, const std::vector<std::size_t>& joints, std::size_t frames) {
  if (joints.empty() || frames == 0) return 0.0;
  double s = 0.0;
  for (std::size_t j : joints) s += per_joint_sum[j];
  return s / (static_cast<double>(joints.size()) * static_cast<double>(frames));
}

int subset_rank(BodySubsetLabel s) {
  switch (s) {
    case BodySubsetLabel::kUp: return 0;
    case BodySubsetLabel::kLow: return 1;
    case BodySubsetLabel::kFull: return 2;
  }
  return 3;
}

std::string fixed4(double v) { return fmt::format("{:.4f}", v); }

std::string optional_fixed4(const std::optional<double>& v) { return v ? fixed4(*v) : std::string(); }

}  // namespace

bool is_lower_body_joint(std::string_view joint_name) {
  return std::find(kLowerBody.begin(), kLowerBody.end(), joint_name) != kLowerBody.end();
}

BodySubset BodySubset::of(BodySubsetLabel label, const Skeleton& skeleton) {
  BodySubset s;
  s.label = label;
  for (std::size_t j = 0; j < skeleton.size(); ++j) {
    const bool low = is_lower_body_joint(skeleton.name(j));
    if (label == BodySubsetLabel::kFull || (label == BodySubsetLabel::kLow) == low) s.joints.push_back(j);
  }
  return s;
}

double mpjpe_positions(const PositionSequence& pred, const PositionSequence& gt, const std::vector<std::size_t>& joints) {
  check_sequences(pred, gt);
  if (pred.empty() || joints.empty()) return 0.0;
  std::vector<double> sums(pred.front().size(), 0.0);
  for (std::size_t t = 0; t < pred.size(); ++t) {
    for (std::size_t j : joints) sums[j] += (pred[t][j] - gt[t][j]).norm();
  }
  return 100.0 * subset_mean(sums, joints, pred.size());
}

double mpjve_positions(const PositionSequence& pred, const PositionSequence& gt, double framerate_hz,
                       const std::vector<std::size_t>& joints) {
  check_sequences(pred, gt);
  if (pred.size() < 2 || joints.empty()) return 0.0;
  const auto vp = joint_velocities(pred, framerate_hz);
  const auto vg = joint_velocities(gt, framerate_hz);
  std::vector<double> sums(pred.front().size(), 0.0);
  for (std::size_t t = 1; t < pred.size(); ++t) {
    for (std::size_t j : joints) sums[j] += (vp[t][j] - vg[t][j]).norm();
  }
  return 100.0 * subset_mean(sums, joints, pred.size() - 1);
}

double mpjpe(const MotionClip& pred, const MotionClip& gt, const BodySubset& subset) {
  check_pair(pred, gt);
  return mpjpe_positions(clip_positions(pred), clip_positions(gt), subset.joints);
}

double mpjve(const MotionClip& pred, const MotionClip& gt, const BodySubset& subset) {
  check_pair(pred, gt);
  if (pred.framerate() != gt.framerate()) throw StructuralError("prediction and ground truth framerates differ");
  return mpjve_positions(clip_positions(pred), clip_positions(gt), gt.framerate(), subset.joints);
}

double mpjre(const MotionClip& pred, const MotionClip& gt, const BodySubset& subset, RotationSpace space) {
  check_pair(pred, gt);
  std::vector<double> sums(gt.skeleton().size(), 0.0);
  for (std::size_t t = 0; t < gt.frame_count(); ++t) {
    if (space == RotationSpace::kLocal) {
      for (std::size_t j : subset.joints) {
        sums[j] += geodesic_angle_deg(pred.pose(t).local_rotations[j], gt.pose(t).local_rotations[j]);
      }
    } else {
      const auto gp = forward_kinematics(pred.skeleton(), pred.pose(t));
      const auto gg = forward_kinematics(gt.skeleton(), gt.pose(t));
      for (std::size_t j : subset.joints) sums[j] += geodesic_angle_deg(gp.rotations[j], gg.rotations[j]);
    }
  }
  return subset_mean(sums, subset.joints, gt.frame_count());
}

// ---------------------------------------------------------------------------

ErrorAccumulator::ErrorAccumulator(std::size_t joint_count)
    : pos_(joint_count, 0.0), rot_(joint_count, 0.0), vel_(joint_count, 0.0) {}

void ErrorAccumulator::add_clip(const MotionClip& pred, const MotionClip& gt, RotationSpace space) {
  check_pair(pred, gt);
  if (gt.skeleton().size() != pos_.size()) throw StructuralError("accumulator joint count does not match the clip");
  if (pred.framerate() != gt.framerate()) throw StructuralError("prediction and ground truth framerates differ");
  const double fps = gt.framerate();
  std::vector<Vec3> prev_p, prev_g;
  for (std::size_t t = 0; t < gt.frame_count(); ++t) {
    const auto gp = forward_kinematics(pred.skeleton(), pred.pose(t));
    const auto gg = forward_kinematics(gt.skeleton(), gt.pose(t));
    for (std::size_t j = 0; j < pos_.size(); ++j) {
      pos_[j] += (gp.positions[j] - gg.positions[j]).norm();
      rot_[j] += space == RotationSpace::kLocal
                     ? geodesic_angle_deg(pred.pose(t).local_rotations[j], gt.pose(t).local_rotations[j])
                     : geodesic_angle_deg(gp.rotations[j], gg.rotations[j]);
      if (t > 0) {
        const Vec3 vp = (gp.positions[j] - prev_p[j]) * fps;
        const Vec3 vg = (gg.positions[j] - prev_g[j]) * fps;
        vel_[j] += (vp - vg).norm();
      }
    }
    prev_p = gp.positions;
    prev_g = gg.positions;
  }
  frames_ += gt.frame_count();
  velocity_frames_ += gt.frame_count() - 1;
}

void ErrorAccumulator::merge(const ErrorAccumulator& other) {
  if (other.pos_.size() != pos_.size()) throw StructuralError("cannot merge accumulators of different joint counts");
  for (std::size_t j = 0; j < pos_.size(); ++j) {
    pos_[j] += other.pos_[j];
    rot_[j] += other.rot_[j];
    vel_[j] += other.vel_[j];
  }
  frames_ += other.frames_;
  velocity_frames_ += other.velocity_frames_;
}

ErrorAccumulator::Metrics ErrorAccumulator::subset_metrics(const BodySubset& subset) const {
  Metrics m;
  m.mpjpe_cm = 100.0 * subset_mean(pos_, subset.joints, frames_);
  m.mpjre_deg = subset_mean(rot_, subset.joints, frames_);
  m.mpjve_cmps = 100.0 * subset_mean(vel_, subset.joints, velocity_frames_);
  return m;
}

// ---------------------------------------------------------------------------
// reports

std::string reference_condition(const std::string& condition) { return condition == "clean" ? "gt_cart" : condition; }

std::string format_level(std::optional<double> level) {
  if (!level) return {};
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, *level);
  return std::string(buf, end);
}

bool report_key_less(const ResultRow& a, const ResultRow& b) {
  if (a.condition != b.condition) return a.condition < b.condition;
  if (a.level.has_value() != b.level.has_value()) return !a.level.has_value();
  if (a.level && !same_level(a.level, b.level)) return *a.level < *b.level;
  if (a.subset != b.subset) return subset_rank(a.subset) < subset_rank(b.subset);
  return a.reconstructor < b.reconstructor;
}

bool same_report_key(const ResultRow& a, const ResultRow& b) {
  return a.condition == b.condition && same_level(a.level, b.level) && a.subset == b.subset &&
         a.reconstructor == b.reconstructor;
}

MetricsReport build_report(std::vector<ResultRow> results, const ReferenceTable* reference,
                           const std::string& reference_model) {
  std::stable_sort(results.begin(), results.end(), report_key_less);
  MetricsReport report;
  report.rows.reserve(results.size());
  for (ResultRow& r : results) {
    ReportRow row;
    if (reference) {
      if (const ReferenceRow* ref = reference->find(reference_condition(r.condition), r.level, reference_model, r.subset)) {
        row.reference_model = reference_model;
        row.delta_mpjpe = r.mpjpe_cm - ref->mpjpe_cm;
        row.delta_mpjre = r.mpjre_deg - ref->mpjre_deg;
        row.delta_mpjve = r.mpjve_cmps - ref->mpjve_cmps;
      }
    }
    row.result = std::move(r);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string report_to_csv(const MetricsReport& report) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const ReportRow& row : report.rows) {
    const ResultRow& r = row.result;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.condition, format_level(r.level), r.reconstructor,
                       to_string(r.subset), fixed4(r.mpjpe_cm), fixed4(r.mpjre_deg), fixed4(r.mpjve_cmps),
                       row.reference_model, optional_fixed4(row.delta_mpjpe), optional_fixed4(row.delta_mpjre),
                       optional_fixed4(row.delta_mpjve));
  }
  return out;
}

std::string report_to_markdown(const MetricsReport& report) {
  std::vector<std::array<std::string, 12>> cells;
  cells.push_back({"condition", "level", "model", "subset", "MPJPE (cm)", "MPJRE (deg)", "MPJVE (cm/s)",
                   "staleness (ms)", "reference", "d MPJPE", "d MPJRE", "d MPJVE"});
  for (const ReportRow& row : report.rows) {
    const ResultRow& r = row.result;
    cells.push_back({r.condition, format_level(r.level), r.reconstructor, std::string(to_string(r.subset)),
                     fixed4(r.mpjpe_cm), fixed4(r.mpjre_deg), fixed4(r.mpjve_cmps), fmt::format("{:.2f}", r.mean_staleness_ms),
                     row.reference_model, optional_fixed4(row.delta_mpjpe), optional_fixed4(row.delta_mpjre),
                     optional_fixed4(row.delta_mpjve)});
  }
  std::array<std::size_t, 12> width{};
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < width.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::string out;
  for (const auto& [key, value] : report.metadata) out += fmt::format("- {}: {}\n", key, value);
  if (!report.metadata.empty()) out += "\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out += "|";
    for (std::size_t c = 0; c < width.size(); ++c) out += fmt::format(" {:<{}} |", cells[i][c], width[c]);
    out += "\n";
    if (i == 0) {
      out += "|";
      for (std::size_t c = 0; c < width.size(); ++c) out += " " + std::string(width[c], '-') + " |";
      out += "\n";
    }
  }
  return out;
}

std::vector<ResultRow> parse_report_csv(std::string_view csv_text) {
  const ReferenceTable table = load_reference_table(csv_text);
  std::vector<ResultRow> rows;
  rows.reserve(table.rows.size());
  for (const ReferenceRow& r : table.rows) {
    ResultRow row;
    row.condition = r.condition;
    row.level = r.level;
    row.reconstructor = r.model;
    row.subset = r.subset;
    row.mpjpe_cm = r.mpjpe_cm;
    row.mpjre_deg = r.mpjre_deg;
    row.mpjve_cmps = r.mpjve_cmps;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ResultRow> merge_results(const std::vector<std::vector<ResultRow>>& sets) {
  std::vector<ResultRow> all;
  for (const auto& s : sets) all.insert(all.end(), s.begin(), s.end());
  std::stable_sort(all.begin(), all.end(), report_key_less);
  std::vector<ResultRow> merged;
  std::vector<std::string> conflicts;
  for (ResultRow& r : all) {
    if (!merged.empty() && same_report_key(merged.back(), r)) {
      const ResultRow& m = merged.back();
      const bool identical = fixed4(m.mpjpe_cm) == fixed4(r.mpjpe_cm) && fixed4(m.mpjre_deg) == fixed4(r.mpjre_deg) &&
                             fixed4(m.mpjve_cmps) == fixed4(r.mpjve_cmps);
      if (!identical) {
        const std::string key = fmt::format("({}, {}, {}, {})", r.condition, format_level(r.level), to_string(r.subset),
                                            r.reconstructor);
        if (conflicts.empty() || conflicts.back() != key) conflicts.push_back(key);
      }
      continue;
    }
    merged.push_back(std::move(r));
  }
  if (!conflicts.empty()) {
    std::string msg = "conflicting duplicate report keys:";
    for (const auto& k : conflicts) msg += " " + k;
    throw Error(msg);
  }
  return merged;
}

}  // namespace avbench
