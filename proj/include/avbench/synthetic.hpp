#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avbench/skeleton.hpp"

namespace avbench {

struct SyntheticMotionOptions {
  double seconds = 60.0;
  double framerate_hz = 60.0;
};

/// Procedural locomotion on the SMPL 22-joint skeleton: a gait cycle along a
/// curved path with arm swing, spine sway, head look-around and seed-dependent
/// gesture overlays. Deterministic in (seed, options).
MotionClip synthesize_clip(const std::string& name, std::uint64_t seed,
                           const SyntheticMotionOptions& options = {});

/// `count` clips named "synth_000", "synth_001", ... with seeds derived from `seed`.
std::vector<MotionClip> synthesize_corpus(std::size_t count, std::uint64_t seed,
                                          const SyntheticMotionOptions& options = {});

}  // namespace avbench
