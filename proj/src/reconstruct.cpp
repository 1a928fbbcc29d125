#include "avbench/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "avbench/error.hpp"

namespace avbench {

// ---------------------------------------------------------------------------
// features

std::vector<std::size_t> FeatureOptions::tap_positions() const {
  if (window_length < 1 || tap_stride < 1) throw ConfigError("window length and tap stride must be >= 1");
  std::vector<std::size_t> taps;
  for (std::size_t back = 0; back < window_length; back += tap_stride) taps.push_back(window_length - 1 - back);
  std::reverse(taps.begin(), taps.end());
  return taps;
}

std::size_t feature_dimension(std::size_t cartesian_joints, const FeatureOptions& options) {
  const std::size_t per_tap = kTrackedJointCount * 15 + cartesian_joints * 3 + (options.use_validity_flags ? cartesian_joints : 0);
  return per_tap * options.tap_positions().size();
}

Eigen::VectorXd encode_features(const Window& window, const FeatureOptions& options) {
  if (window.size() != options.window_length) {
    throw StructuralError("window has " + std::to_string(window.size()) + " frames, features expect " +
                          std::to_string(options.window_length));
  }
  const std::size_t joints = window.current().cartesian.positions.size();
  Eigen::VectorXd out(feature_dimension(joints, options));
  Eigen::Index k = 0;
  for (std::size_t tap : options.tap_positions()) {
    const FusedFrame& f = window[tap];
    if (f.cartesian.positions.size() != joints) throw StructuralError("cartesian joint count varies inside a window");
    for (const TrackedState& s : f.sparse.joints) {
      out.segment<3>(k) = s.position;
      out.segment<6>(k + 3) = s.orientation.to_6d();
      out.segment<3>(k + 9) = s.linear_velocity;
      out.segment<3>(k + 12) = s.angular_velocity;
      k += 15;
    }
    for (const Vec3& p : f.cartesian.positions) {
      out.segment<3>(k) = p;
      k += 3;
    }
    if (options.use_validity_flags) {
      for (bool v : f.cartesian.valid) out[k++] = v ? 1.0 : 0.0;
    }
  }
  return out;
}

TrainingSet build_training_set(std::span<const MotionClip> clips, const FeatureOptions& options) {
  if (clips.empty()) throw StructuralError("training needs at least one clip");
  std::size_t rows = 0;
  for (const MotionClip& c : clips) rows += c.frame_count();
  TrainingSet set;
  const std::size_t dim = feature_dimension(clips.front().skeleton().size(), options);
  set.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  set.poses.reserve(rows);
  Eigen::Index r = 0;
  for (const MotionClip& clip : clips) {
    const auto fused = align(derive_sparse_stream(clip), cartesian_from_clip(clip));
    for (std::size_t t = 0; t < fused.size(); ++t) {
      const Eigen::VectorXd f = encode_features(Window(fused, t, options.window_length), options);
      if (static_cast<std::size_t>(f.size()) != dim) throw StructuralError("training clips use different skeletons");
      set.features.row(r++) = f.transpose();
      set.poses.push_back(clip.pose(t));
    }
  }
  return set;
}

FeatureScaler FeatureScaler::fit(const Eigen::MatrixXd& x) {
  FeatureScaler s;
  s.mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean;
  s.scale = (centered.colwise().squaredNorm() / std::max<double>(1.0, static_cast<double>(x.rows()))).cwiseSqrt();
  for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
    if (!(s.scale[i] > 1e-12)) s.scale[i] = 1.0;
  }
  return s;
}

Eigen::MatrixXd FeatureScaler::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

Eigen::VectorXd FeatureScaler::apply(const Eigen::VectorXd& x) const {
  return ((x.transpose() - mean).array() / scale.array()).transpose();
}

std::vector<Prediction> reconstruct_sequence(const Reconstructor& reconstructor, std::span<const FusedFrame> frames) {
  std::vector<Prediction> out;
  out.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Window w(frames, t, reconstructor.window_length());
    out.push_back(reconstructor.predict(w, out.empty() ? nullptr : &out.back().pose));
  }
  return out;
}

// ---------------------------------------------------------------------------
// inverse kinematics

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

struct IkEvaluation {
  GlobalPose global;
  Eigen::VectorXd residual;
  double objective = 0.0;
  double position_sse = 0.0;
};

class IkProblem {
 public:
  IkProblem(const Skeleton& skeleton, std::span<const Vec3> targets, const std::vector<bool>& valid,
            std::span<const OrientationTarget> orientations, const IkOptions& options)
      : skeleton_(skeleton), targets_(targets), orientations_(orientations), options_(options) {
    for (std::size_t j = 0; j < skeleton.size(); ++j) {
      if (valid[j]) active_.push_back(j);
    }
    for (const auto& o : orientations) {
      if (o.joint >= skeleton.size()) throw StructuralError("orientation target joint out of range");
    }
    ancestors_.resize(skeleton.size());
    for (std::size_t j = 0; j < skeleton.size(); ++j) {
      for (int a = static_cast<int>(j); a != Skeleton::kNoParent; a = skeleton.parent(static_cast<std::size_t>(a))) {
        ancestors_[j].push_back(static_cast<std::size_t>(a));
      }
    }
    rot_scale_ = std::sqrt(options.rotation_weight);
  }

  std::size_t active_count() const { return active_.size(); }
  Eigen::Index rows() const { return static_cast<Eigen::Index>(3 * (active_.size() + orientations_.size())); }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(3 + 3 * skeleton_.size()); }

  IkEvaluation evaluate(const Pose& pose) const {
    IkEvaluation e;
    e.global = forward_kinematics(skeleton_, pose);
    e.residual.resize(rows());
    Eigen::Index r = 0;
    for (std::size_t j : active_) {
      e.residual.segment<3>(r) = e.global.positions[j] - targets_[j];
      r += 3;
    }
    e.position_sse = e.residual.head(r).squaredNorm();
    for (const auto& o : orientations_) {
      const Rotation err = e.global.rotations[o.joint] * o.orientation.inverse();
      e.residual.segment<3>(r) = rot_scale_ * err.to_rotation_vector();
      r += 3;
    }
    e.objective = e.residual.squaredNorm();
    return e;
  }

  // Accumulates J^T J (lower triangle) and J^T r block by block. Each residual
  // row block touches only the root translation and the joint's ancestors.
  void normal_equations(const IkEvaluation& e, Eigen::MatrixXd& normal, Eigen::VectorXd& gradient) const {
    normal.setZero(cols(), cols());
    gradient.setZero(cols());
    std::vector<std::pair<Eigen::Index, Mat3>> blocks;
    auto accumulate = [&](const Vec3& r) {
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& [ci, ji] = blocks[i];
        gradient.segment<3>(ci) += ji.transpose() * r;
        for (std::size_t k = 0; k <= i; ++k) {
          const auto& [ck, jk] = blocks[k];
          // ancestors are listed leaf to root, so ck <= ci except for the translation block at 0
          if (ci >= ck) {
            normal.block<3, 3>(ci, ck) += ji.transpose() * jk;
          } else {
            normal.block<3, 3>(ck, ci) += jk.transpose() * ji;
          }
        }
      }
    };
    Eigen::Index r = 0;
    for (std::size_t j : active_) {
      blocks.clear();
      if (options_.fit_root_translation) blocks.emplace_back(0, Mat3::Identity());
      for (std::size_t a : ancestors_[j]) {
        if (a != j) blocks.emplace_back(static_cast<Eigen::Index>(3 + 3 * a), -skew(e.global.positions[j] - e.global.positions[a]));
      }
      accumulate(e.residual.segment<3>(r));
      r += 3;
    }
    for (const auto& o : orientations_) {
      blocks.clear();
      for (std::size_t a : ancestors_[o.joint]) blocks.emplace_back(static_cast<Eigen::Index>(3 + 3 * a), rot_scale_ * Mat3::Identity());
      accumulate(e.residual.segment<3>(r));
      r += 3;
    }
  }

  // Rotates the subtree of every joint k about its own position by exp(step_k)
  // in world coordinates, and shifts the root.
  Pose apply(const Pose& pose, const GlobalPose& global, const Eigen::VectorXd& step) const {
    Pose out = pose;
    if (options_.fit_root_translation) out.root_translation += step.head<3>();
    for (std::size_t k = 0; k < skeleton_.size(); ++k) {
      const Vec3 d = step.segment<3>(static_cast<Eigen::Index>(3 + 3 * k));
      if (d.isZero(0.0)) continue;
      const Rotation world_delta = Rotation::from_rotation_vector(d);
      if (k == 0) {
        out.local_rotations[0] = world_delta * pose.local_rotations[0];
      } else {
        const Rotation& parent = global.rotations[static_cast<std::size_t>(skeleton_.parent(k))];
        out.local_rotations[k] = parent.inverse() * world_delta * parent * pose.local_rotations[k];
      }
    }
    return out;
  }

 private:
  const Skeleton& skeleton_;
  std::span<const Vec3> targets_;
  std::span<const OrientationTarget> orientations_;
  const IkOptions& options_;
  std::vector<std::size_t> active_;
  std::vector<std::vector<std::size_t>> ancestors_;
  double rot_scale_ = 0.0;
};

}  // namespace

IkResult solve_ik(const Skeleton& skeleton, std::span<const Vec3> targets, const std::vector<bool>& valid,
                  std::span<const OrientationTarget> orientations, const Pose& initial, const IkOptions& options) {
  if (targets.size() != skeleton.size() || valid.size() != skeleton.size()) {
    throw StructuralError("IK targets must cover every skeleton joint");
  }
  if (initial.local_rotations.size() != skeleton.size()) throw StructuralError("IK initial pose does not fit the skeleton");

  IkResult result;
  result.pose = initial;
  const IkProblem problem(skeleton, targets, valid, orientations, options);
  if (problem.active_count() == 0) {
    result.held = true;
    return result;
  }

  IkEvaluation current = problem.evaluate(initial);
  result.objective_history.push_back(current.objective);
  const double n_active = static_cast<double>(problem.active_count());
  auto rms = [&](const IkEvaluation& e) { return std::sqrt(e.position_sse / n_active); };

  double mu = options.damping;
  Eigen::MatrixXd normal;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd damped;
  Eigen::LLT<Eigen::MatrixXd> llt(problem.cols());
  while (result.iterations < options.max_iterations && rms(current) >= options.rms_tolerance_m) {
    problem.normal_equations(current, normal, gradient);

    bool accepted = false;
    double improvement = 0.0;
    while (result.iterations < options.max_iterations) {
      ++result.iterations;
      damped = normal;
      damped.diagonal().array() += mu;
      llt.compute(damped);  // reads the lower triangle only
      const Eigen::VectorXd step = -llt.solve(gradient);
      const Pose candidate = problem.apply(result.pose, current.global, step);
      IkEvaluation trial = problem.evaluate(candidate);
      if (trial.objective < current.objective) {
        improvement = (current.objective - trial.objective) / current.objective;
        result.pose = candidate;
        current = std::move(trial);
        result.objective_history.push_back(current.objective);
        mu = std::max(mu * 0.3, 1e-9);
        accepted = true;
        break;
      }
      mu *= 10.0;
      if (mu > 1e10) break;
    }
    if (!accepted || improvement < options.min_relative_improvement) break;
  }
  result.rms_position_residual = rms(current);
  return result;
}

IkReconstructor::IkReconstructor(Skeleton skeleton, IkOptions options)
    : skeleton_(std::move(skeleton)), options_(options) {
  for (std::size_t k = 0; k < kTrackedJointCount; ++k) tracked_[k] = skeleton_.index_of(kTrackedJointNames[k]);
}

Prediction IkReconstructor::predict(const Window& window, const Pose* previous) const {
  const FusedFrame& f = window.current();
  const Pose start = previous ? *previous : Pose::identity(skeleton_.size());
  std::array<OrientationTarget, kTrackedJointCount> orientations;
  for (std::size_t k = 0; k < kTrackedJointCount; ++k) {
    orientations[k] = {tracked_[k], f.sparse.joints[k].orientation};
  }
  IkResult r = solve_ik(skeleton_, f.cartesian.positions, f.cartesian.valid, orientations, start, options_);
  return {std::move(r.pose), r.held};
}

// ---------------------------------------------------------------------------
// k nearest neighbours

Pose blend_poses(std::span<const Pose> poses, std::span<const double> distances) {
  if (poses.empty() || poses.size() != distances.size()) throw StructuralError("blend needs one distance per pose");
  if (poses.size() == 1) return poses.front();
  const std::size_t joints = poses.front().local_rotations.size();
  std::vector<double> w(poses.size());
  double total = 0.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    w[i] = 1.0 / (distances[i] + 1e-9);
    total += w[i];
  }
  Pose out = Pose::identity(joints);
  out.root_translation.setZero();
  for (std::size_t i = 0; i < poses.size(); ++i) out.root_translation += (w[i] / total) * poses[i].root_translation;
  for (std::size_t j = 0; j < joints; ++j) {
    const Eigen::Vector4d ref = poses.front().local_rotations[j].quaternion().coeffs();
    Eigen::Vector4d acc = Eigen::Vector4d::Zero();
    for (std::size_t i = 0; i < poses.size(); ++i) {
      const Eigen::Vector4d q = poses[i].local_rotations[j].quaternion().coeffs();
      acc += (w[i] / total) * (q.dot(ref) < 0.0 ? -q : q);
    }
    Eigen::Quaterniond blended;
    blended.coeffs() = acc;
    out.local_rotations[j] = Rotation::normalized(blended);
  }
  return out;
}

KnnReconstructor::KnnReconstructor(Skeleton skeleton, std::size_t k, FeatureOptions features)
    : skeleton_(std::move(skeleton)), k_(k), features_(features) {
  if (k_ < 1) throw ConfigError("k must be >= 1");
}

void KnnReconstructor::fit(std::span<const MotionClip> clips) {
  TrainingSet set = build_training_set(clips, features_);
  fit(set.features, std::move(set.poses));
}

void KnnReconstructor::fit(const Eigen::MatrixXd& features, std::vector<Pose> poses) {
  if (poses.empty()) throw StructuralError("kNN database is empty");
  if (static_cast<std::size_t>(features.rows()) != poses.size()) throw StructuralError("kNN features and poses differ in count");
  scaler_ = FeatureScaler::fit(features);
  database_ = scaler_.apply(features);
  poses_ = std::move(poses);
  if (k_ > poses_.size()) {
    std::cerr << "warning: k=" << k_ << " exceeds the kNN database size " << poses_.size() << "; using k="
              << poses_.size() << "\n";
  }
}

std::vector<std::pair<std::size_t, double>> KnnReconstructor::neighbours(const Eigen::VectorXd& raw_features) const {
  if (poses_.empty()) throw StructuralError("kNN reconstructor has not been fitted");
  if (raw_features.size() != database_.cols()) throw StructuralError("query feature dimension does not match the database");
  const Eigen::RowVectorXd q = scaler_.apply(raw_features).transpose();
  const Eigen::VectorXd d2 = (database_.rowwise() - q).rowwise().squaredNorm();
  std::vector<std::size_t> order(poses_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t k = effective_k();
  auto closer = [&](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), closer);
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(order[i], std::sqrt(d2[order[i]]));
  return out;
}

Pose KnnReconstructor::predict_features(const Eigen::VectorXd& raw_features) const {
  const auto nn = neighbours(raw_features);
  std::vector<Pose> poses;
  std::vector<double> dist;
  for (const auto& [i, d] : nn) {
    poses.push_back(poses_[i]);
    dist.push_back(d);
  }
  return blend_poses(poses, dist);
}

Prediction KnnReconstructor::predict(const Window& window, const Pose*) const {
  return {predict_features(encode_features(window, features_)), false};
}

// ---------------------------------------------------------------------------
// ridge regression

RidgeSolution ridge_solve(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda, bool fit_intercept) {
  if (x.rows() != y.rows()) throw StructuralError("ridge: feature and target row counts differ");
  if (x.rows() == 0) throw StructuralError("ridge: no training rows");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("ridge: lambda must be a finite value >= 0");

  RidgeSolution sol;
  Eigen::RowVectorXd x_mean = Eigen::RowVectorXd::Zero(x.cols());
  Eigen::RowVectorXd y_mean = Eigen::RowVectorXd::Zero(y.cols());
  if (fit_intercept) {
    x_mean = x.colwise().mean();
    y_mean = y.colwise().mean();
  }
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::MatrixXd yc = y.rowwise() - y_mean;

  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
    if (qr.rank() < xc.cols()) {
      throw SingularSystemError("ridge: design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                                std::to_string(xc.cols()) + "); use lambda > 0");
    }
    sol.weights = qr.solve(yc);
  } else {
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(xc.cols(), xc.cols());
    normal.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
    normal.diagonal().array() += lambda;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal.selfadjointView<Eigen::Lower>());
    if (ldlt.info() != Eigen::Success) throw SingularSystemError("ridge: regularized normal equations failed to factor");
    sol.weights = ldlt.solve(xc.transpose() * yc);
  }
  sol.intercept = y_mean - x_mean * sol.weights;
  return sol;
}

Eigen::VectorXd pose_targets(const Pose& pose) {
  const std::size_t n = pose.local_rotations.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(6 * n + 3));
  for (std::size_t j = 0; j < n; ++j) out.segment<6>(static_cast<Eigen::Index>(6 * j)) = pose.local_rotations[j].to_6d();
  out.tail<3>() = pose.root_translation;
  return out;
}

Pose pose_from_targets(const Eigen::VectorXd& targets, std::size_t joint_count) {
  if (static_cast<std::size_t>(targets.size()) != 6 * joint_count + 3) throw StructuralError("target vector has the wrong size");
  Pose pose = Pose::identity(joint_count);
  for (std::size_t j = 0; j < joint_count; ++j) {
    try {
      pose.local_rotations[j] = Rotation::from_6d(targets.segment<6>(static_cast<Eigen::Index>(6 * j)));
    } catch (const InvalidRotationError&) {
      pose.local_rotations[j] = Rotation::identity();
    }
  }
  pose.root_translation = targets.tail<3>();
  return pose;
}

RidgeReconstructor::RidgeReconstructor(Skeleton skeleton, double lambda, FeatureOptions features)
    : skeleton_(std::move(skeleton)), lambda_(lambda), features_(features) {
  if (!(lambda_ >= 0.0)) throw ConfigError("ridge lambda must be >= 0");
}

void RidgeReconstructor::fit(std::span<const MotionClip> clips) {
  const TrainingSet set = build_training_set(clips, features_);
  fit(set.features, set.poses);
}

void RidgeReconstructor::fit(const Eigen::MatrixXd& features, const std::vector<Pose>& poses) {
  if (poses.empty() || static_cast<std::size_t>(features.rows()) != poses.size()) {
    throw StructuralError("ridge needs one pose per feature row");
  }
  Eigen::MatrixXd y(features.rows(), static_cast<Eigen::Index>(6 * skeleton_.size() + 3));
  for (std::size_t i = 0; i < poses.size(); ++i) y.row(static_cast<Eigen::Index>(i)) = pose_targets(poses[i]).transpose();
  scaler_ = FeatureScaler::fit(features);
  solution_ = ridge_solve(scaler_.apply(features), y, lambda_, true);
}

Pose RidgeReconstructor::predict_features(const Eigen::VectorXd& raw_features) const {
  if (solution_.weights.size() == 0) throw StructuralError("ridge reconstructor has not been fitted");
  if (raw_features.size() != solution_.weights.rows()) throw StructuralError("query feature dimension does not match the model");
  const Eigen::RowVectorXd out = scaler_.apply(raw_features).transpose() * solution_.weights + solution_.intercept;
  return pose_from_targets(out.transpose(), skeleton_.size());
}

Prediction RidgeReconstructor::predict(const Window& window, const Pose*) const {
  return {predict_features(encode_features(window, features_)), false};
}

}  // namespace avbench
