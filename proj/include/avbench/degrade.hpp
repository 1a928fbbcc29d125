#pragma once

#include <cstdint>

#include "avbench/sensor_sim.hpp"

namespace avbench {

/// One point of the artifact grid.
struct DegradationConfig {
  std::size_t delay_frames = 0;
  std::size_t fps_ratio = 1;
  double noise_std_m = 0.0;
  double occlusion_prob = 0.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on fps_ratio < 1, negative noise or a probability outside [0, 1].
  void validate() const;
  bool is_neutral() const { return delay_frames == 0 && fps_ratio == 1 && noise_std_m == 0.0 && occlusion_prob == 0.0; }

  friend bool operator==(const DegradationConfig&, const DegradationConfig&) = default;
};

/// Output frame t carries the payload of input frame max(t - d, 0): positions,
/// validity and capture time move, the delivery timestamp stays.
CartesianStream apply_delay(const CartesianStream& stream, std::size_t delay_frames);

/// Zero-order hold: output frame t carries input frame floor(t / r) * r.
CartesianStream apply_framerate_ratio(const CartesianStream& stream, std::size_t fps_ratio);

/// Each joint of each frame is independently zeroed and flagged invalid with
/// probability `occlusion_prob`.
CartesianStream apply_occlusion(const CartesianStream& stream, double occlusion_prob, std::uint64_t seed);

/// Adds N(0, sigma^2) to every coordinate of every valid joint; invalid joints stay zero.
CartesianStream apply_noise(const CartesianStream& stream, double noise_std_m, std::uint64_t seed);

/// Sub-seeds handed to the stochastic operators by compose().
std::uint64_t occlusion_seed(std::uint64_t seed);
std::uint64_t noise_seed(std::uint64_t seed);

/// framerate -> delay -> occlusion -> noise, with per-operator sub-seeds from config.seed.
CartesianStream compose(const CartesianStream& stream, const DegradationConfig& config);

}  // namespace avbench
