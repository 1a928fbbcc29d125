#include "avbench/sync.hpp"

#include <algorithm>

#include "avbench/error.hpp"

namespace avbench {

namespace {
constexpr double kClockTolerance = 1e-9;
}

std::vector<FusedFrame> align(const SparseStream& sparse, const CartesianStream& cartesian) {
  if (sparse.samples.empty()) throw StructuralError("cannot align an empty sparse stream");
  if (cartesian.samples.empty()) throw StructuralError("cannot align an empty cartesian stream");
  std::vector<FusedFrame> out;
  out.reserve(sparse.samples.size());
  // both streams are time ordered, so the paired index only moves forward
  std::size_t next = 0;
  for (const SparseSample& s : sparse.samples) {
    while (next < cartesian.samples.size() && cartesian.samples[next].timestamp <= s.timestamp + kClockTolerance) ++next;
    FusedFrame f;
    f.timestamp = s.timestamp;
    f.sparse = s;
    f.stale = next == 0;
    const std::size_t idx = next == 0 ? 0 : next - 1;
    const CartesianSample& c = cartesian.samples[idx];
    f.cartesian.positions = c.positions;
    f.cartesian.valid = c.valid;
    f.cartesian.source_index = idx;
    // a borrowed future sample must not claim a future capture time
    f.cartesian.source_timestamp = std::min(c.capture_time, s.timestamp);
    out.push_back(std::move(f));
  }
  return out;
}

Window::Window(std::span<const FusedFrame> frames, std::size_t t, std::size_t length) : frames_(frames) {
  if (length < 1) throw StructuralError("window length must be >= 1");
  if (t >= frames.size()) throw StructuralError("window index out of range");
  indices_.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t back = length - 1 - i;
    indices_[i] = t >= back ? t - back : 0;
  }
}

StalenessStats staleness_stats(std::span<const FusedFrame> frames) {
  StalenessStats stats;
  if (frames.empty()) return stats;
  double sum = 0.0;
  for (const FusedFrame& f : frames) {
    sum += f.staleness();
    stats.max_s = std::max(stats.max_s, f.staleness());
  }
  stats.mean_s = sum / static_cast<double>(frames.size());
  return stats;
}

}  // namespace avbench
