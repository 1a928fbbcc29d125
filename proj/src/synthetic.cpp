#include "avbench/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include "avbench/error.hpp"
#include "avbench/seeding.hpp"

namespace avbench {

namespace {

struct Overlay {
  Vec3 amplitude_rad;
  double frequency_hz;
  double phase;
};

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

Rotation euler_xyz(double x, double y, double z) {
  return Rotation::from_axis_angle(Vec3::UnitZ(), z) * Rotation::from_axis_angle(Vec3::UnitX(), x) *
         Rotation::from_axis_angle(Vec3::UnitY(), y);
}

}  // namespace

MotionClip synthesize_clip(const std::string& name, std::uint64_t seed,
                           const SyntheticMotionOptions& options) {
  if (!(options.seconds > 0.0) || !(options.framerate_hz > 0.0)) {
    throw StructuralError("synthetic clip needs positive duration and framerate");
  }
  using namespace smpl;
  std::mt19937_64 rng(derive_seed(seed, 0x5157));

  const double gait_hz = uniform(rng, 0.7, 1.1);
  const double speed = uniform(rng, 0.4, 1.3);
  const double path_radius = uniform(rng, 2.0, 5.0);
  const double hip_amp = uniform(rng, 0.25, 0.45);
  const double knee_amp = uniform(rng, 0.5, 0.9);
  const double arm_swing = uniform(rng, 0.2, 0.5);
  const double arm_drop = uniform(rng, 1.1, 1.35);
  const double elbow_bend = uniform(rng, 0.2, 0.7);
  const double head_yaw_amp = uniform(rng, 0.2, 0.6);
  const double head_yaw_hz = uniform(rng, 0.1, 0.3);
  // fraction of time spent walking vs. standing and gesturing
  const double walk_duty = uniform(rng, 0.4, 1.0);
  const double walk_cycle_s = uniform(rng, 6.0, 14.0);

  std::array<Overlay, kSmplJointCount> overlays{};
  for (auto& o : overlays) {
    o.amplitude_rad = Vec3(uniform(rng, 0.0, 0.15), uniform(rng, 0.0, 0.15), uniform(rng, 0.0, 0.15));
    o.frequency_hz = uniform(rng, 0.15, 1.2);
    o.phase = uniform(rng, 0.0, 2.0 * kPi);
  }
  // arms get larger free-form gestures; they are what VR users move most
  for (std::size_t j : {kLeftShoulder, kRightShoulder, kLeftElbow, kRightElbow}) {
    overlays[j].amplitude_rad *= 3.0;
  }

  const auto frames = static_cast<std::size_t>(std::llround(options.seconds * options.framerate_hz));
  std::vector<Pose> poses;
  poses.reserve(frames);
  const Skeleton& skeleton = Skeleton::smpl22();

  double arc = 0.0;
  double gait_phase = 0.0;
  const double dt = 1.0 / options.framerate_hz;
  for (std::size_t f = 0; f < frames; ++f) {
    const double t = static_cast<double>(f) * dt;
    // smooth walk/stand envelope in [0, 1]
    const double cycle = std::fmod(t / walk_cycle_s, 1.0);
    double walk = cycle < walk_duty ? 1.0 : 0.0;
    const double ramp = 0.08;
    if (cycle < ramp) walk = cycle / ramp;
    if (walk_duty < 1.0 && cycle >= walk_duty - ramp && cycle < walk_duty) walk = (walk_duty - cycle) / ramp;
    walk = 0.5 - 0.5 * std::cos(kPi * walk);

    arc += walk * speed * dt;
    gait_phase += 2.0 * kPi * gait_hz * dt * (0.3 + 0.7 * walk);
    const double s = std::sin(gait_phase);
    const double c = std::cos(gait_phase);

    Pose pose = Pose::identity(kSmplJointCount);
    const double heading = arc / path_radius;
    pose.root_translation = Vec3(path_radius * std::sin(heading), 0.93 + 0.02 * walk * std::cos(2.0 * gait_phase),
                                 path_radius * (1.0 - std::cos(heading)));
    pose.local_rotations[kPelvis] = Rotation::from_axis_angle(Vec3::UnitY(), heading) *
                                    euler_xyz(0.05 * walk * std::sin(2.0 * gait_phase), 0.08 * walk * s, 0.0);

    pose.local_rotations[kLeftHip] = euler_xyz(-hip_amp * walk * s, 0.0, 0.03);
    pose.local_rotations[kRightHip] = euler_xyz(hip_amp * walk * s, 0.0, -0.03);
    pose.local_rotations[kLeftKnee] = euler_xyz(knee_amp * walk * 0.5 * (1.0 + std::sin(gait_phase + 1.2)) + 0.05, 0.0, 0.0);
    pose.local_rotations[kRightKnee] = euler_xyz(knee_amp * walk * 0.5 * (1.0 - std::sin(gait_phase - 1.9)) + 0.05, 0.0, 0.0);
    pose.local_rotations[kLeftAnkle] = euler_xyz(-0.15 * walk * c, 0.0, 0.0);
    pose.local_rotations[kRightAnkle] = euler_xyz(0.15 * walk * c, 0.0, 0.0);

    pose.local_rotations[kSpine1] = euler_xyz(0.04, -0.06 * walk * s, 0.0);
    pose.local_rotations[kSpine2] = euler_xyz(0.02, -0.04 * walk * s, 0.0);
    pose.local_rotations[kSpine3] = euler_xyz(0.0, -0.03 * walk * s, 0.0);
    pose.local_rotations[kHead] =
        euler_xyz(0.1 * std::sin(2.0 * kPi * 0.7 * head_yaw_hz * t), head_yaw_amp * std::sin(2.0 * kPi * head_yaw_hz * t), 0.0);

    pose.local_rotations[kLeftShoulder] = euler_xyz(arm_swing * walk * s, 0.0, -arm_drop);
    pose.local_rotations[kRightShoulder] = euler_xyz(-arm_swing * walk * s, 0.0, arm_drop);
    pose.local_rotations[kLeftElbow] = euler_xyz(0.0, elbow_bend + 0.2 * walk * s, 0.0);
    pose.local_rotations[kRightElbow] = euler_xyz(0.0, -elbow_bend + 0.2 * walk * s, 0.0);

    for (std::size_t j = 0; j < kSmplJointCount; ++j) {
      if (j == kPelvis) continue;
      const Overlay& o = overlays[j];
      const double gesture = (j >= kLeftShoulder ? 1.0 - 0.6 * walk : 0.3);
      const double w = std::sin(2.0 * kPi * o.frequency_hz * t + o.phase) * gesture;
      const Vec3 v = o.amplitude_rad * w;
      pose.local_rotations[j] = pose.local_rotations[j] * euler_xyz(v.x(), v.y(), v.z());
    }
    poses.push_back(std::move(pose));
  }
  return MotionClip(name, skeleton, options.framerate_hz, std::move(poses));
}

std::vector<MotionClip> synthesize_corpus(std::size_t count, std::uint64_t seed,
                                          const SyntheticMotionOptions& options) {
  std::vector<MotionClip> clips;
  clips.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%03zu", i);
    clips.push_back(synthesize_clip(name, derive_seed(seed, i), options));
  }
  return clips;
}

}  // namespace avbench
