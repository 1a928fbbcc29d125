#include "avbench/degrade.hpp"

#include <cmath>
#include <random>

#include "avbench/error.hpp"
#include "avbench/seeding.hpp"

namespace avbench {

namespace {

// Copies the payload of `from` into `to`, keeping `to`'s delivery timestamp.
void copy_payload(const CartesianSample& from, CartesianSample& to) {
  to.capture_time = from.capture_time;
  to.positions = from.positions;
  to.valid = from.valid;
}

}  // namespace

void DegradationConfig::validate() const {
  if (fps_ratio < 1) throw ConfigError("fps_ratio must be >= 1");
  if (!(noise_std_m >= 0.0) || !std::isfinite(noise_std_m)) throw ConfigError("noise_std_m must be a finite value >= 0");
  if (!(occlusion_prob >= 0.0 && occlusion_prob <= 1.0)) throw ConfigError("occlusion_prob must lie in [0, 1]");
}

CartesianStream apply_delay(const CartesianStream& stream, std::size_t delay_frames) {
  CartesianStream out = stream;
  if (delay_frames == 0) return out;
  for (std::size_t t = 0; t < out.samples.size(); ++t) {
    const std::size_t src = t >= delay_frames ? t - delay_frames : 0;
    copy_payload(stream.samples[src], out.samples[t]);
  }
  return out;
}

CartesianStream apply_framerate_ratio(const CartesianStream& stream, std::size_t fps_ratio) {
  if (fps_ratio < 1) throw ConfigError("fps_ratio must be >= 1");
  CartesianStream out = stream;
  if (fps_ratio == 1) return out;
  for (std::size_t t = 0; t < out.samples.size(); ++t) {
    copy_payload(stream.samples[(t / fps_ratio) * fps_ratio], out.samples[t]);
  }
  return out;
}

CartesianStream apply_occlusion(const CartesianStream& stream, double occlusion_prob, std::uint64_t seed) {
  if (!(occlusion_prob >= 0.0 && occlusion_prob <= 1.0)) throw ConfigError("occlusion_prob must lie in [0, 1]");
  CartesianStream out = stream;
  if (occlusion_prob == 0.0) return out;
  for (std::size_t t = 0; t < out.samples.size(); ++t) {
    auto engine = frame_engine(seed, t);
    CartesianSample& s = out.samples[t];
    for (std::size_t j = 0; j < s.positions.size(); ++j) {
      if (uniform01(engine) < occlusion_prob) {
        s.positions[j] = Vec3::Zero();
        s.valid[j] = false;
      }
    }
  }
  return out;
}

CartesianStream apply_noise(const CartesianStream& stream, double noise_std_m, std::uint64_t seed) {
  if (!(noise_std_m >= 0.0) || !std::isfinite(noise_std_m)) throw ConfigError("noise_std_m must be a finite value >= 0");
  CartesianStream out = stream;
  if (noise_std_m == 0.0) return out;
  for (std::size_t t = 0; t < out.samples.size(); ++t) {
    auto engine = frame_engine(seed, t);
    std::normal_distribution<double> gauss(0.0, noise_std_m);
    CartesianSample& s = out.samples[t];
    for (std::size_t j = 0; j < s.positions.size(); ++j) {
      // draw for every joint so the pattern does not depend on occlusion
      const Vec3 n(gauss(engine), gauss(engine), gauss(engine));
      if (s.valid[j]) s.positions[j] += n;
    }
  }
  return out;
}

std::uint64_t occlusion_seed(std::uint64_t seed) { return derive_seed(seed, 0x0CC1); }
std::uint64_t noise_seed(std::uint64_t seed) { return derive_seed(seed, 0x9015E); }

CartesianStream compose(const CartesianStream& stream, const DegradationConfig& config) {
  config.validate();
  CartesianStream out = apply_framerate_ratio(stream, config.fps_ratio);
  out = apply_delay(out, config.delay_frames);
  out = apply_occlusion(out, config.occlusion_prob, occlusion_seed(config.seed));
  return apply_noise(out, config.noise_std_m, noise_seed(config.seed));
}

}  // namespace avbench
