#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "avbench/skeleton.hpp"

namespace avbench {

using Vec2 = Eigen::Vector2d;

// ---------------------------------------------------------------------------
// VR sparse inputs

enum class TrackedJoint : std::size_t { kHead = 0, kLeftWrist = 1, kRightWrist = 2 };
inline constexpr std::size_t kTrackedJointCount = 3;
inline constexpr std::array<const char*, kTrackedJointCount> kTrackedJointNames = {"head", "left_wrist", "right_wrist"};

struct TrackedState {
  Vec3 position = Vec3::Zero();
  Rotation orientation;
  Vec3 linear_velocity = Vec3::Zero();
  /// Global frame, rad/s.
  Vec3 angular_velocity = Vec3::Zero();

  friend bool operator==(const TrackedState&, const TrackedState&) = default;
};

struct SparseSample {
  double timestamp = 0.0;
  std::array<TrackedState, kTrackedJointCount> joints;

  const TrackedState& operator[](TrackedJoint j) const { return joints[static_cast<std::size_t>(j)]; }
  friend bool operator==(const SparseSample&, const SparseSample&) = default;
};

struct SparseStream {
  double framerate = 60.0;
  std::vector<SparseSample> samples;

  friend bool operator==(const SparseStream&, const SparseStream&) = default;
};

/// Head and wrist tracking signals from FK: global position and orientation,
/// backward-difference linear velocity, and angular velocity from the relative
/// rotation q[t-1]^-1 q[t] mapped to the global frame, divided by the frame time.
/// Frame 0 velocities are zero. Throws StructuralError when the skeleton lacks
/// head, left_wrist or right_wrist.
SparseStream derive_sparse_stream(const MotionClip& clip);

// ---------------------------------------------------------------------------
// Cartesian stream

struct CartesianSample {
  /// Delivery time on the stream's clock.
  double timestamp = 0.0;
  /// When the payload was captured. Equal to `timestamp` until an operator makes it stale.
  double capture_time = 0.0;
  std::vector<Vec3> positions;
  /// Invalid joints carry position (0, 0, 0).
  std::vector<bool> valid;

  friend bool operator==(const CartesianSample&, const CartesianSample&) = default;
};

struct CartesianStream {
  double framerate = 60.0;
  std::vector<CartesianSample> samples;

  std::size_t size() const { return samples.size(); }
  friend bool operator==(const CartesianStream&, const CartesianStream&) = default;
};

/// Ground-truth stream: FK positions of every frame, all joints valid.
CartesianStream cartesian_from_clip(const MotionClip& clip);

// ---------------------------------------------------------------------------
// cameras

/// Pinhole camera. `rotation` maps camera axes to world axes (columns are the
/// camera x-right, y-down, z-forward directions), so x_cam = R^T (p - center).
struct CameraModel {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;
  Rotation rotation;
  Vec3 center = Vec3::Zero();

  /// Throws ConfigError unless fx, fy > 0 and the principal point lies inside the image.
  void validate() const;

  /// Camera at `center` looking at `target` with `world_up` pointing up in the image.
  static CameraModel look_at(const Vec3& center, const Vec3& target, const Vec3& world_up = Vec3::UnitY(),
                             double focal_px = 500.0, int width = 640, int height = 480);

  /// 3x4 projection matrix K [R^T | -R^T c].
  Eigen::Matrix<double, 3, 4> projection_matrix() const;
};

/// Default rig: two cameras 2.5 m high, 3 m from the capture-volume center
/// (0, 1, 0), 90 degrees apart, both aimed at the center.
std::array<CameraModel, 2> default_camera_rig();

/// Pixel of a world point, or nullopt when its depth is <= 1e-6 m.
std::optional<Vec2> project(const CameraModel& camera, const Vec3& point);

struct Detection2D {
  double timestamp = 0.0;
  std::vector<Vec2> pixels;
  std::vector<bool> visible;
  /// False when the pixel falls outside the image; such detections are kept.
  std::vector<bool> in_image;

  friend bool operator==(const Detection2D&, const Detection2D&) = default;
};

struct DetectionStream {
  double framerate = 60.0;
  std::vector<Detection2D> frames;

  friend bool operator==(const DetectionStream&, const DetectionStream&) = default;
};

struct DetectorModel {
  double pixel_noise_std = 0.0;
  double miss_prob = 0.0;
  std::uint64_t seed = 0;
};

/// Projects every FK joint, adds isotropic Gaussian pixel noise, and drops
/// joints with probability miss_prob or when behind the camera. Each frame
/// draws from its own generator derived from (seed, frame).
DetectionStream synthesize_detections(const MotionClip& clip, const CameraModel& camera, const DetectorModel& model);

/// Homogeneous DLT triangulation from two views (SVD of the 4x4 system).
/// Throws DegenerateGeometryError when the camera centers are closer than
/// 1e-6 m, or the system's second-smallest singular value falls below 1e-10
/// of the largest (rays near parallel), or the solution lies at infinity.
Vec3 triangulate(const CameraModel& cam_a, const CameraModel& cam_b, const Vec2& px_a, const Vec2& px_b);

/// Triangulates joints visible in both views; others (and degenerate ones)
/// become invalid with position zero. Throws StructuralError on length or
/// joint-count mismatch.
CartesianStream reconstruct_cartesian_stream(const DetectionStream& a, const DetectionStream& b,
                                             const CameraModel& cam_a, const CameraModel& cam_b);

}  // namespace avbench
