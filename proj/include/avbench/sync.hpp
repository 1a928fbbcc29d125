#pragma once

#include <span>
#include <vector>

#include "avbench/sensor_sim.hpp"

namespace avbench {

struct FusedCartesian {
  std::vector<Vec3> positions;
  std::vector<bool> valid;
  /// Capture time of the payload; never later than the fused frame's timestamp.
  double source_timestamp = 0.0;
  /// Index of the cartesian sample that was paired.
  std::size_t source_index = 0;
};

struct FusedFrame {
  double timestamp = 0.0;
  SparseSample sparse;
  FusedCartesian cartesian;
  /// True when no cartesian sample had arrived yet and the first one was borrowed.
  bool stale = false;

  double staleness() const { return timestamp - cartesian.source_timestamp; }
};

/// Pairs every sparse sample (the master clock) with the most recent
/// cartesian sample delivered at or before it (1e-9 s tolerance). Frames that
/// precede the first delivery use the first sample and are flagged stale.
/// Throws StructuralError when either stream is empty.
std::vector<FusedFrame> align(const SparseStream& sparse, const CartesianStream& cartesian);

inline constexpr std::size_t kDefaultWindowLength = 41;

/// Frames [t - length + 1, t] with indices below zero clamped to frame 0.
class Window {
 public:
  Window(std::span<const FusedFrame> frames, std::size_t t, std::size_t length = kDefaultWindowLength);

  std::size_t size() const { return indices_.size(); }
  const std::vector<std::size_t>& indices() const { return indices_; }
  const FusedFrame& operator[](std::size_t i) const { return frames_[indices_[i]]; }
  const FusedFrame& current() const { return frames_[indices_.back()]; }
  std::size_t current_index() const { return indices_.back(); }

 private:
  std::span<const FusedFrame> frames_;
  std::vector<std::size_t> indices_;
};

/// Mean and maximum of per-frame staleness, in seconds.
struct StalenessStats {
  double mean_s = 0.0;
  double max_s = 0.0;
};
StalenessStats staleness_stats(std::span<const FusedFrame> frames);

}  // namespace avbench
