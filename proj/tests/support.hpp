#pragma once

// Test-side oracles and fixtures. Nothing here calls into the code under test
// except to build inputs.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "avbench/skeleton.hpp"

namespace avbench::testing {

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Rodrigues' formula, written out without Eigen's quaternion code.
inline Mat3 rodrigues(const Vec3& axis, double angle) {
  const Vec3 k = axis.normalized();
  Mat3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(angle) * kx + (1.0 - std::cos(angle)) * kx * kx;
}

/// Random rotation as (axis, angle), so tests can build both a Rotation and an independent matrix.
struct AxisAngle {
  Vec3 axis;
  double angle;
  Rotation rotation() const { return Rotation::from_axis_angle(axis, angle); }
  Mat3 matrix() const { return rodrigues(axis, angle); }
};

inline AxisAngle random_axis_angle(std::mt19937_64& rng, double max_angle = 3.14159265358979323846) {
  return {random_unit(rng), uniform(rng, 0.0, max_angle)};
}

struct RandomPose {
  Pose pose;
  std::vector<AxisAngle> parts;
};

inline RandomPose random_pose(std::mt19937_64& rng, std::size_t joints, double max_angle = 3.14159265358979323846) {
  RandomPose out;
  out.pose = Pose::identity(joints);
  out.pose.root_translation = Vec3(uniform(rng, -2, 2), uniform(rng, 0, 2), uniform(rng, -2, 2));
  for (std::size_t j = 0; j < joints; ++j) {
    out.parts.push_back(random_axis_angle(rng, max_angle));
    out.pose.local_rotations[j] = out.parts.back().rotation();
  }
  return out;
}

/// Homogeneous 4x4 matrix chain: T_j = T_parent * [R_j | offset_j], root [R_0 | t].
inline std::vector<Vec3> fk_matrix_chain(const Skeleton& skeleton, const Vec3& root_translation,
                                         const std::vector<Mat3>& local) {
  std::vector<Eigen::Matrix4d> world(skeleton.size());
  std::vector<Vec3> out(skeleton.size());
  for (std::size_t j = 0; j < skeleton.size(); ++j) {
    Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
    t.topLeftCorner<3, 3>() = local[j];
    t.topRightCorner<3, 1>() = j == 0 ? root_translation : skeleton.rest_offset(j);
    world[j] = j == 0 ? t : Eigen::Matrix4d(world[static_cast<std::size_t>(skeleton.parent(j))] * t);
    out[j] = world[j].topRightCorner<3, 1>();
  }
  return out;
}

/// Independent random pose per frame on the SMPL tree.
inline MotionClip random_clip(std::mt19937_64& rng, const std::string& name, std::size_t frames,
                              double framerate = 60.0, double max_angle = 1.0) {
  std::vector<Pose> poses;
  for (std::size_t f = 0; f < frames; ++f) poses.push_back(random_pose(rng, kSmplJointCount, max_angle).pose);
  return MotionClip(name, Skeleton::smpl22(), framerate, std::move(poses));
}

/// Static clip of `frames` copies of one pose.
inline MotionClip static_clip(const Pose& pose, std::size_t frames, double framerate = 60.0,
                              const std::string& name = "static") {
  return MotionClip(name, Skeleton::smpl22(), framerate, std::vector<Pose>(frames, pose));
}

inline Skeleton two_joint_chain(const Vec3& child_offset) {
  return Skeleton({"root", "child"}, {-1, 0}, {Vec3::Zero(), child_offset});
}

}  // namespace avbench::testing
