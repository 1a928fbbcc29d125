#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "avbench/skeleton.hpp"
#include "avbench/sync.hpp"

namespace avbench {

// ---------------------------------------------------------------------------
// features

struct FeatureOptions {
  std::size_t window_length = kDefaultWindowLength;
  /// Frames sampled from the window, counted back from the current frame:
  /// offsets 0, stride, 2*stride, ... that stay inside the window. 1 flattens every frame.
  std::size_t tap_stride = 10;
  /// Append one 0/1 validity flag per cartesian joint to every tap.
  bool use_validity_flags = true;

  std::vector<std::size_t> tap_positions() const;
};

/// Per tap, in order: for head, left wrist, right wrist {position 3, 6D
/// orientation 6, linear velocity 3, angular velocity 3}; then every cartesian
/// joint position (3 each); then validity flags when enabled. Taps run from the
/// oldest to the current frame.
Eigen::VectorXd encode_features(const Window& window, const FeatureOptions& options);
std::size_t feature_dimension(std::size_t cartesian_joints, const FeatureOptions& options);

/// Feature rows and ground-truth poses for every frame of every clip, built from
/// clean streams (derived sparse + FK cartesian).
struct TrainingSet {
  Eigen::MatrixXd features;  // one row per sample
  std::vector<Pose> poses;
};
TrainingSet build_training_set(std::span<const MotionClip> clips, const FeatureOptions& options);

/// Per-dimension standardization; constant dimensions get unit scale.
struct FeatureScaler {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static FeatureScaler fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

// ---------------------------------------------------------------------------
// interface

struct Prediction {
  Pose pose;
  /// Set when the reconstructor had nothing to work with and repeated the previous pose.
  bool held = false;
};

/// Maps a fused window to a full-body pose. predict() is const and
/// deterministic given the fitted state; `previous` is the caller's last
/// prediction for the same sequence (nullptr on the first frame).
class Reconstructor {
 public:
  virtual ~Reconstructor() = default;
  virtual std::string name() const = 0;
  virtual const Skeleton& skeleton() const = 0;
  virtual void fit(std::span<const MotionClip> clips) = 0;
  virtual Prediction predict(const Window& window, const Pose* previous) const = 0;
  virtual std::size_t window_length() const { return kDefaultWindowLength; }
};

/// Runs a reconstructor over every frame of a fused sequence, threading each
/// prediction into the next call.
std::vector<Prediction> reconstruct_sequence(const Reconstructor& reconstructor, std::span<const FusedFrame> frames);

// ---------------------------------------------------------------------------
// inverse kinematics

struct IkOptions {
  double damping = 0.01;
  double rotation_weight = 0.5;
  std::size_t max_iterations = 100;
  double rms_tolerance_m = 1e-4;
  /// Stop once an accepted step improves the objective by less than this fraction.
  double min_relative_improvement = 1e-4;
  bool fit_root_translation = true;
};

struct OrientationTarget {
  std::size_t joint = 0;
  Rotation orientation;
};

struct IkResult {
  Pose pose;
  std::size_t iterations = 0;
  /// Objective after each accepted iterate, starting with the initial pose.
  std::vector<double> objective_history;
  double rms_position_residual = 0.0;
  bool held = false;
};

/// Damped least-squares (Levenberg-Marquardt) fit of root translation and all
/// local rotations to the valid position targets, with orientation targets as
/// soft constraints weighted by rotation_weight. Steps that do not lower the
/// objective are rejected and the damping raised, so the objective never grows.
/// With no valid position target the initial pose is returned with held = true.
IkResult solve_ik(const Skeleton& skeleton, std::span<const Vec3> targets, const std::vector<bool>& valid,
                  std::span<const OrientationTarget> orientations, const Pose& initial, const IkOptions& options = {});

class IkReconstructor final : public Reconstructor {
 public:
  explicit IkReconstructor(Skeleton skeleton, IkOptions options = {});

  std::string name() const override { return "ik"; }
  const Skeleton& skeleton() const override { return skeleton_; }
  void fit(std::span<const MotionClip>) override {}
  Prediction predict(const Window& window, const Pose* previous) const override;
  const IkOptions& options() const { return options_; }

 private:
  Skeleton skeleton_;
  IkOptions options_;
  std::array<std::size_t, kTrackedJointCount> tracked_{};
};

// ---------------------------------------------------------------------------
// k nearest neighbours

/// Distance-weighted blend of poses (weights 1 / (distance + 1e-9)).
/// Rotations are sign-aligned to the first pose, averaged and renormalized;
/// translations are averaged linearly.
Pose blend_poses(std::span<const Pose> poses, std::span<const double> distances);

class KnnReconstructor final : public Reconstructor {
 public:
  KnnReconstructor(Skeleton skeleton, std::size_t k, FeatureOptions features = {});

  std::string name() const override { return "knn"; }
  const Skeleton& skeleton() const override { return skeleton_; }
  std::size_t window_length() const override { return features_.window_length; }
  void fit(std::span<const MotionClip> clips) override;
  /// Builds the database from precomputed raw feature rows and their poses.
  void fit(const Eigen::MatrixXd& features, std::vector<Pose> poses);
  Prediction predict(const Window& window, const Pose* previous) const override;

  /// k nearest database rows to a raw feature vector, nearest first; ties go
  /// to the lower index. Distances are Euclidean in standardized space.
  std::vector<std::pair<std::size_t, double>> neighbours(const Eigen::VectorXd& raw_features) const;
  Pose predict_features(const Eigen::VectorXd& raw_features) const;

  std::size_t k() const { return k_; }
  std::size_t effective_k() const { return std::min(k_, poses_.size()); }
  std::size_t database_size() const { return poses_.size(); }
  const FeatureOptions& feature_options() const { return features_; }

 private:
  Skeleton skeleton_;
  std::size_t k_;
  FeatureOptions features_;
  FeatureScaler scaler_;
  Eigen::MatrixXd database_;
  std::vector<Pose> poses_;
};

// ---------------------------------------------------------------------------
// ridge regression

struct RidgeSolution {
  Eigen::MatrixXd weights;      // features x targets
  Eigen::RowVectorXd intercept;  // zero when not fitted
};

/// Minimizes ||X W + 1 b - Y||^2 + lambda ||W||^2. lambda = 0 uses a
/// column-pivoting QR of X and throws SingularSystemError when X is rank
/// deficient; lambda > 0 uses a Cholesky (LDLT) factorization of the
/// regularized normal equations. The intercept is never penalized.
RidgeSolution ridge_solve(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda, bool fit_intercept);

/// Regression targets of a pose: 6D rotation of every joint then root translation.
Eigen::VectorXd pose_targets(const Pose& pose);
/// Inverse of pose_targets; a 6D block that cannot be orthonormalized decodes to identity.
Pose pose_from_targets(const Eigen::VectorXd& targets, std::size_t joint_count);

class RidgeReconstructor final : public Reconstructor {
 public:
  RidgeReconstructor(Skeleton skeleton, double lambda, FeatureOptions features = {});

  std::string name() const override { return "ridge"; }
  const Skeleton& skeleton() const override { return skeleton_; }
  std::size_t window_length() const override { return features_.window_length; }
  void fit(std::span<const MotionClip> clips) override;
  void fit(const Eigen::MatrixXd& features, const std::vector<Pose>& poses);
  Prediction predict(const Window& window, const Pose* previous) const override;
  Pose predict_features(const Eigen::VectorXd& raw_features) const;

  const RidgeSolution& solution() const { return solution_; }
  double lambda() const { return lambda_; }

 private:
  Skeleton skeleton_;
  double lambda_;
  FeatureOptions features_;
  FeatureScaler scaler_;
  RidgeSolution solution_;
};

}  // namespace avbench
