#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "avbench/degrade.hpp"
#include "avbench/metrics.hpp"
#include "avbench/reconstruct.hpp"
#include "avbench/sensor_sim.hpp"

namespace avbench {

enum class CartesianSource { kGroundTruth, kTriangulated };

struct SyntheticCorpusSpec {
  std::size_t count = 1;
  double seconds = 60.0;
  double framerate_hz = 60.0;
  std::uint64_t seed = 0;
};

struct ReconstructorSpec {
  std::string type = "ik";  // "ik" | "knn" | "ridge"
  std::size_t k = 5;
  double lambda = 1.0;
  double w_rot = 0.5;
  double damping = 0.01;
  bool use_validity_flags = true;
  std::size_t tap_stride = 10;
};

struct GridSpec {
  std::vector<std::size_t> delay_frames{0};
  std::vector<std::size_t> fps_ratio{1};
  std::vector<double> noise_std_m{0.0};
  std::vector<double> occlusion_prob{0.0};
};

struct ExperimentConfig {
  std::vector<std::string> clips;  // paths or glob patterns (.bvh / .json)
  std::optional<SyntheticCorpusSpec> synthetic;
  std::vector<std::string> train_clips;
  std::optional<SyntheticCorpusSpec> synthetic_train;
  double bvh_length_scale = 1.0;
  std::array<CameraModel, 2> cameras = default_camera_rig();
  DetectorModel detection;
  CartesianSource cartesian_source = CartesianSource::kGroundTruth;
  GridSpec grid;
  bool full_product = false;
  std::vector<std::uint64_t> seeds{0};
  std::vector<ReconstructorSpec> reconstructors{ReconstructorSpec{}};
  std::string output_dir = "avbench_out";
  std::size_t window_length = kDefaultWindowLength;
  std::string reference_model = "avatarposer";
  /// Directory of `simulate` outputs to sweep over instead of simulating in-flight.
  std::optional<std::string> streams_dir;
};

/// Parses and validates an experiment config. Errors raise ConfigError with a
/// JSON path, e.g. "$.grid.noise_std_m[1]: expected a number >= 0".
ExperimentConfig parse_experiment_config(std::string_view json_text);
/// Structural checks beyond the schema (nonempty grid lists, clip sources, reconstructor needs).
void validate_experiment_config(const ExperimentConfig& config);

/// One evaluated grid point.
struct GridPoint {
  std::string condition;
  std::optional<double> level;
  DegradationConfig degradation;  // seed filled per run
  bool stochastic() const { return degradation.noise_std_m > 0.0 || degradation.occlusion_prob > 0.0; }
};

/// "clean" first, then each artifact value on its own (delay frames, fps ratio,
/// noise in cm, occlusion probability), skipping neutral values. With
/// full_product, every combination of the lists instead.
std::vector<GridPoint> expand_grid(const GridSpec& grid, bool full_product);

/// Degradation seed for a (run seed, clip) pair. Independent of the grid point,
/// so every level of an artifact reuses the same random draws.
std::uint64_t clip_seed(std::uint64_t run_seed, std::string_view clip_name);

std::uint64_t fnv1a64(std::string_view bytes);

struct LoadedClips {
  std::vector<MotionClip> clips;  // sorted by name
  std::vector<std::string> errors;
  std::vector<std::pair<std::string, std::uint64_t>> digests;  // (source, fnv1a64)
};

LoadedClips load_clips(const std::vector<std::string>& patterns, const std::optional<SyntheticCorpusSpec>& synthetic,
                       double bvh_length_scale);

std::unique_ptr<Reconstructor> make_reconstructor(const ReconstructorSpec& spec, const Skeleton& skeleton,
                                                  std::size_t window_length);

/// Cartesian input for a clip: FK positions, or project -> detect -> triangulate through the rig.
CartesianStream simulate_cartesian(const MotionClip& clip, const ExperimentConfig& config);

struct RunOutcome {
  std::vector<std::string> written_files;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

/// Writes <out>/streams/<clip>.sparse.json and <clip>.cartesian.json per clip.
RunOutcome run_simulate(const ExperimentConfig& config, std::size_t jobs);

struct SweepResult {
  std::vector<ResultRow> rows;
  std::vector<std::string> errors;
};

/// Evaluates every grid point x seed x clip x reconstructor with a bounded
/// worker pool and reduces in sorted order, so any job count gives identical rows.
SweepResult evaluate_sweep(const ExperimentConfig& config, std::size_t jobs);

/// evaluate_sweep plus report.csv, report.md and run_manifest.json in the output directory.
RunOutcome run_sweep(const ExperimentConfig& config, std::size_t jobs, const std::optional<std::string>& reference_path);

/// Merges report CSVs and writes the merged report.csv / report.md to `out_dir`.
RunOutcome run_report(const std::vector<std::string>& report_paths, const std::string& out_dir,
                      const std::optional<std::string>& reference_path, const std::string& reference_model);

inline constexpr std::string_view kToolVersion = "0.1.0";

}  // namespace avbench
