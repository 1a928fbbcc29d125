#include "avbench/skeleton.hpp"

#include <cmath>
#include <unordered_set>

#include "avbench/error.hpp"

namespace avbench {

Skeleton::Skeleton(std::vector<std::string> joint_names, std::vector<int> parents,
                   std::vector<Vec3> rest_offsets)
    : names_(std::move(joint_names)), parents_(std::move(parents)), offsets_(std::move(rest_offsets)) {
  if (names_.empty()) throw StructuralError("skeleton has no joints");
  if (parents_.size() != names_.size() || offsets_.size() != names_.size()) {
    throw StructuralError("skeleton names, parents and offsets differ in length");
  }
  if (parents_[0] != kNoParent) throw StructuralError("joint 0 must be the root");
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!seen.insert(names_[i]).second) {
      throw StructuralError("duplicate joint name '" + names_[i] + "'");
    }
    if (i > 0 && (parents_[i] < 0 || static_cast<std::size_t>(parents_[i]) >= i)) {
      throw StructuralError("joint '" + names_[i] + "' must have a parent with a smaller index");
    }
    if (!offsets_[i].allFinite()) {
      throw StructuralError("joint '" + names_[i] + "' has a non-finite offset");
    }
  }
  if (!offsets_[0].isZero(0.0)) throw StructuralError("root rest offset must be zero");
}

const Skeleton& Skeleton::smpl22() {
  static const Skeleton skeleton(
      {"pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee", "spine2",
       "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot", "neck", "left_collar",
       "right_collar", "head", "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
       "left_wrist", "right_wrist"},
      {kNoParent, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19},
      {Vec3(0.0, 0.0, 0.0), Vec3(0.058, -0.082, -0.018), Vec3(-0.060, -0.091, -0.014),
       Vec3(0.004, 0.124, -0.038), Vec3(0.043, -0.386, 0.008), Vec3(-0.043, -0.383, -0.005),
       Vec3(0.004, 0.138, 0.027), Vec3(-0.015, -0.427, -0.037), Vec3(0.019, -0.424, -0.035),
       Vec3(0.000, 0.056, 0.002), Vec3(0.041, -0.060, 0.122), Vec3(-0.035, -0.063, 0.130),
       Vec3(-0.013, 0.212, -0.034), Vec3(0.072, 0.114, -0.019), Vec3(-0.083, 0.112, -0.024),
       Vec3(0.010, 0.089, 0.050), Vec3(0.123, 0.045, -0.019), Vec3(-0.113, 0.047, -0.009),
       Vec3(0.255, -0.016, -0.023), Vec3(-0.260, -0.014, -0.031), Vec3(0.266, 0.009, -0.003),
       Vec3(-0.269, 0.007, -0.006)});
  return skeleton;
}

std::optional<std::size_t> Skeleton::find(std::string_view joint_name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == joint_name) return i;
  }
  return std::nullopt;
}

std::size_t Skeleton::index_of(std::string_view joint_name) const {
  if (auto i = find(joint_name)) return *i;
  throw StructuralError("skeleton has no joint named '" + std::string(joint_name) + "'");
}

bool Skeleton::is_ancestor(std::size_t ancestor, std::size_t joint) const {
  for (int j = static_cast<int>(joint); j != kNoParent; j = parents_[j]) {
    if (static_cast<std::size_t>(j) == ancestor) return true;
  }
  return false;
}

bool Skeleton::matches(const Skeleton& other, double tolerance_m) const {
  if (names_ != other.names_ || parents_ != other.parents_) return false;
  for (std::size_t j = 0; j < offsets_.size(); ++j) {
    if ((offsets_[j] - other.offsets_[j]).norm() > tolerance_m) return false;
  }
  return true;
}

bool Skeleton::is_canonical_smpl22() const { return *this == smpl22(); }

MotionClip::MotionClip(std::string name, Skeleton skeleton, double framerate_hz,
                       std::vector<Pose> poses)
    : name_(std::move(name)),
      skeleton_(std::move(skeleton)),
      framerate_(framerate_hz),
      poses_(std::move(poses)) {
  if (!(framerate_ > 0.0) || !std::isfinite(framerate_)) {
    throw StructuralError("clip framerate must be positive and finite");
  }
  if (poses_.empty()) throw StructuralError("clip '" + name_ + "' has no frames");
  for (std::size_t t = 0; t < poses_.size(); ++t) {
    if (poses_[t].local_rotations.size() != skeleton_.size()) {
      throw StructuralError("frame " + std::to_string(t) + " has " +
                            std::to_string(poses_[t].local_rotations.size()) +
                            " rotations for a " + std::to_string(skeleton_.size()) +
                            "-joint skeleton");
    }
    if (!poses_[t].root_translation.allFinite()) {
      throw StructuralError("frame " + std::to_string(t) + " has a non-finite root translation");
    }
  }
}

GlobalPose forward_kinematics(const Skeleton& skeleton, const Pose& pose) {
  const std::size_t n = skeleton.size();
  if (pose.local_rotations.size() != n) {
    throw StructuralError("pose has " + std::to_string(pose.local_rotations.size()) +
                          " rotations, skeleton has " + std::to_string(n) + " joints");
  }
  GlobalPose out;
  out.positions.resize(n);
  out.rotations.resize(n);
  out.positions[0] = pose.root_translation;
  out.rotations[0] = pose.local_rotations[0];
  for (std::size_t i = 1; i < n; ++i) {
    const auto p = static_cast<std::size_t>(skeleton.parent(i));
    out.positions[i] = out.positions[p] + out.rotations[p] * skeleton.rest_offset(i);
    out.rotations[i] = out.rotations[p] * pose.local_rotations[i];
  }
  return out;
}

std::vector<std::vector<Vec3>> clip_positions(const MotionClip& clip) {
  std::vector<std::vector<Vec3>> out;
  out.reserve(clip.frame_count());
  for (const Pose& pose : clip.poses()) {
    out.push_back(forward_kinematics(clip.skeleton(), pose).positions);
  }
  return out;
}

std::vector<std::vector<Vec3>> joint_velocities(const std::vector<std::vector<Vec3>>& positions,
                                                double framerate_hz) {
  std::vector<std::vector<Vec3>> out(positions.size());
  for (std::size_t t = 0; t < positions.size(); ++t) {
    out[t].assign(positions[t].size(), Vec3::Zero());
    if (t == 0) continue;
    if (positions[t].size() != positions[t - 1].size()) {
      throw StructuralError("joint count changes between frames");
    }
    for (std::size_t j = 0; j < positions[t].size(); ++j) {
      out[t][j] = (positions[t][j] - positions[t - 1][j]) * framerate_hz;
    }
  }
  return out;
}

std::vector<std::vector<Vec3>> joint_velocities(const MotionClip& clip) {
  return joint_velocities(clip_positions(clip), clip.framerate());
}

}  // namespace avbench
