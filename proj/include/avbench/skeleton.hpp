#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "avbench/rotation.hpp"

namespace avbench {

/// Kinematic tree with joints stored in topological order (parent index < child index).
class Skeleton {
 public:
  static constexpr int kNoParent = -1;

  /// Validates: nonempty, single root at index 0, parent(i) < i, zero root offset,
  /// unique joint names.
  Skeleton(std::vector<std::string> joint_names, std::vector<int> parents,
           std::vector<Vec3> rest_offsets);

  /// The 22-joint SMPL body tree: pelvis root, legs, spine, neck/head, arms.
  ///
  /// Order: pelvis, left_hip, right_hip, spine1, left_knee, right_knee, spine2,
  /// left_ankle, right_ankle, spine3, left_foot, right_foot, neck, left_collar,
  /// right_collar, head, left_shoulder, right_shoulder, left_elbow, right_elbow,
  /// left_wrist, right_wrist. Offsets are neutral-body values in meters, y up.
  static const Skeleton& smpl22();

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& joint_names() const { return names_; }
  const std::string& name(std::size_t joint) const { return names_.at(joint); }
  int parent(std::size_t joint) const { return parents_.at(joint); }
  const std::vector<int>& parents() const { return parents_; }
  const Vec3& rest_offset(std::size_t joint) const { return offsets_.at(joint); }
  const std::vector<Vec3>& rest_offsets() const { return offsets_; }

  std::optional<std::size_t> find(std::string_view joint_name) const;
  /// Throws StructuralError naming the missing joint.
  std::size_t index_of(std::string_view joint_name) const;

  /// True when `ancestor` lies on the path from `joint` to the root (a joint is its own ancestor).
  bool is_ancestor(std::size_t ancestor, std::size_t joint) const;

  bool is_canonical_smpl22() const;

  friend bool operator==(const Skeleton&, const Skeleton&) = default;
  /// Same names and parents, offsets equal within `tolerance_m`.
  bool matches(const Skeleton& other, double tolerance_m = 1e-9) const;

 private:
  std::vector<std::string> names_;
  std::vector<int> parents_;
  std::vector<Vec3> offsets_;
};

inline constexpr std::size_t kSmplJointCount = 22;

namespace smpl {
enum Joint : std::size_t {
  kPelvis = 0,
  kLeftHip,
  kRightHip,
  kSpine1,
  kLeftKnee,
  kRightKnee,
  kSpine2,
  kLeftAnkle,
  kRightAnkle,
  kSpine3,
  kLeftFoot,
  kRightFoot,
  kNeck,
  kLeftCollar,
  kRightCollar,
  kHead,
  kLeftShoulder,
  kRightShoulder,
  kLeftElbow,
  kRightElbow,
  kLeftWrist,
  kRightWrist,
};
}  // namespace smpl

struct Pose {
  Vec3 root_translation = Vec3::Zero();
  std::vector<Rotation> local_rotations;

  static Pose identity(std::size_t joint_count) {
    return Pose{Vec3::Zero(), std::vector<Rotation>(joint_count)};
  }

  friend bool operator==(const Pose&, const Pose&) = default;
};

class MotionClip {
 public:
  /// Validates: nonempty, framerate > 0 and finite, every pose sized for the skeleton.
  MotionClip(std::string name, Skeleton skeleton, double framerate_hz, std::vector<Pose> poses);

  const std::string& name() const { return name_; }
  const Skeleton& skeleton() const { return skeleton_; }
  double framerate() const { return framerate_; }
  double frame_time() const { return 1.0 / framerate_; }
  std::size_t frame_count() const { return poses_.size(); }
  const std::vector<Pose>& poses() const { return poses_; }
  const Pose& pose(std::size_t frame) const { return poses_.at(frame); }

  friend bool operator==(const MotionClip&, const MotionClip&) = default;

 private:
  std::string name_;
  Skeleton skeleton_;
  double framerate_;
  std::vector<Pose> poses_;
};

struct GlobalPose {
  std::vector<Vec3> positions;
  std::vector<Rotation> rotations;
};

/// Global joint positions (m) and orientations from root translation and local rotations.
/// Throws StructuralError when the pose does not match the skeleton's joint count.
GlobalPose forward_kinematics(const Skeleton& skeleton, const Pose& pose);

/// FK positions for every frame of a clip.
std::vector<std::vector<Vec3>> clip_positions(const MotionClip& clip);

/// Backward-difference velocities in m/s; frame 0 is zero.
std::vector<std::vector<Vec3>> joint_velocities(const MotionClip& clip);
std::vector<std::vector<Vec3>> joint_velocities(const std::vector<std::vector<Vec3>>& positions,
                                                double framerate_hz);

}  // namespace avbench
