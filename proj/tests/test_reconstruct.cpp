#include <doctest.h>

#include <cmath>
#include <random>

#include "avbench/degrade.hpp"
#include "avbench/error.hpp"
#include "avbench/metrics.hpp"
#include "avbench/reconstruct.hpp"
#include "avbench/synthetic.hpp"
#include "support.hpp"

using namespace avbench;
using namespace avbench::testing;

namespace {

std::vector<FusedFrame> clean_frames(const MotionClip& clip) {
  return align(derive_sparse_stream(clip), cartesian_from_clip(clip));
}

MotionClip as_clip(const MotionClip& gt, const std::vector<Prediction>& preds) {
  std::vector<Pose> poses;
  for (const Prediction& p : preds) poses.push_back(p.pose);
  return MotionClip(gt.name(), gt.skeleton(), gt.framerate(), poses);
}

bool valid_pose(const Pose& p) {
  if (!p.root_translation.allFinite()) return false;
  for (const Rotation& r : p.local_rotations) {
    if (std::abs(r.quaternion().norm() - 1.0) > 1e-9 || r.w() < 0.0) return false;
  }
  return true;
}

// Independent nearest-neighbour blend: full sort by distance, then weighted quaternion sum.
Pose brute_force_blend(const std::vector<std::pair<std::size_t, double>>& nn, const std::vector<Pose>& poses) {
  double total = 0.0;
  for (const auto& [i, d] : nn) total += 1.0 / (d + 1e-9);
  Pose out = Pose::identity(poses.front().local_rotations.size());
  for (const auto& [i, d] : nn) out.root_translation += (1.0 / (d + 1e-9) / total) * poses[i].root_translation;
  for (std::size_t j = 0; j < out.local_rotations.size(); ++j) {
    const Eigen::Vector4d ref = poses[nn.front().first].local_rotations[j].quaternion().coeffs();
    Eigen::Vector4d acc = Eigen::Vector4d::Zero();
    for (const auto& [i, d] : nn) {
      Eigen::Vector4d q = poses[i].local_rotations[j].quaternion().coeffs();
      if (q.dot(ref) < 0) q = -q;
      acc += (1.0 / (d + 1e-9) / total) * q;
    }
    acc.normalize();
    out.local_rotations[j] = Rotation::from_wxyz(acc[3], acc[0], acc[1], acc[2]);
  }
  return out;
}

}  // namespace

TEST_CASE("features: taps and dimension") {
  FeatureOptions o;
  CHECK(o.tap_positions() == std::vector<std::size_t>{0, 10, 20, 30, 40});
  CHECK(feature_dimension(22, o) == 665);
  o.tap_stride = 1;
  CHECK(o.tap_positions().size() == 41);
  o.use_validity_flags = false;
  CHECK(feature_dimension(22, o) == 41 * (45 + 66));
  o.tap_stride = 0;
  CHECK_THROWS_AS(o.tap_positions(), ConfigError);
}

TEST_CASE("features: layout of the current tap") {
  const MotionClip clip = synthesize_clip("f", 1, SyntheticMotionOptions{1.0, 60.0});
  const auto fused = clean_frames(clip);
  const FeatureOptions o;
  const Eigen::VectorXd f = encode_features(Window(fused, 50), o);
  const Eigen::Index tap = 133 * 4;  // current frame is the last tap
  const FusedFrame& cur = fused[50];
  CHECK(f.segment<3>(tap) == cur.sparse.joints[0].position);
  CHECK(f.segment<6>(tap + 3) == cur.sparse.joints[0].orientation.to_6d());
  CHECK(f.segment<3>(tap + 45) == cur.cartesian.positions[0]);
  CHECK(f[tap + 45 + 66] == 1.0);
  // oldest tap is frame 10
  CHECK(f.segment<3>(0) == fused[10].sparse.joints[0].position);
  CHECK_THROWS_AS(encode_features(Window(fused, 50, 10), o), StructuralError);
}

TEST_CASE("ik: recovers FK targets along a clip") {
  const MotionClip clip = synthesize_clip("ik", 5, SyntheticMotionOptions{4.0, 60.0});
  const IkReconstructor ik(clip.skeleton());
  const auto preds = reconstruct_sequence(ik, clean_frames(clip));
  const MotionClip pred = as_clip(clip, preds);
  const auto gt_pos = clip_positions(clip);
  const auto pr_pos = clip_positions(pred);
  std::size_t good = 0;
  for (std::size_t t = 0; t < gt_pos.size(); ++t) {
    double e = 0.0;
    for (std::size_t j = 0; j < 22; ++j) e += (gt_pos[t][j] - pr_pos[t][j]).norm();
    good += e / 22.0 * 100.0 <= 0.5 ? 1 : 0;
    CHECK(valid_pose(preds[t].pose));
  }
  CHECK(static_cast<double>(good) >= 0.95 * static_cast<double>(gt_pos.size()));
}

TEST_CASE("ik: rest-pose targets give near-identity rotations") {
  const Skeleton& s = Skeleton::smpl22();
  const GlobalPose rest = forward_kinematics(s, Pose::identity(22));
  std::vector<OrientationTarget> orient;
  for (std::size_t j : {std::size_t{smpl::kHead}, std::size_t{smpl::kLeftWrist}, std::size_t{smpl::kRightWrist}}) {
    orient.push_back({j, Rotation::identity()});
  }
  const IkResult r = solve_ik(s, rest.positions, std::vector<bool>(22, true), orient, Pose::identity(22));
  for (const Rotation& q : r.pose.local_rotations) CHECK(geodesic_angle_deg(q, Rotation::identity()) <= 1.0);
  CHECK(r.rms_position_residual < 1e-4);
}

TEST_CASE("ik: toy chain saturates towards an unreachable target") {
  // three links of 0.3, 0.3 and 0.4 m: total length 1
  const Skeleton chain({"base", "a", "b", "tip"}, {-1, 0, 1, 2},
                       {Vec3::Zero(), Vec3(0.3, 0, 0), Vec3(0.3, 0, 0), Vec3(0.4, 0, 0)});
  Pose start = Pose::identity(4);
  start.local_rotations[0] = Rotation::from_axis_angle(Vec3::UnitZ(), 0.4);
  start.local_rotations[1] = Rotation::from_axis_angle(Vec3(0, 1, 1), 0.5);
  start.local_rotations[2] = Rotation::from_axis_angle(Vec3::UnitY(), -0.7);
  const Vec3 target = Vec3(0.3, 1.2, -0.9).normalized() * 1.5;
  std::vector<Vec3> targets(4, Vec3::Zero());
  targets[3] = target;
  std::vector<bool> valid{false, false, false, true};
  IkOptions o;
  o.fit_root_translation = false;
  o.min_relative_improvement = 0.0;
  o.max_iterations = 500;
  const IkResult r = solve_ik(chain, targets, valid, {}, start, o);
  const GlobalPose g = forward_kinematics(chain, r.pose);
  CHECK(std::abs((g.positions[3] - target).norm() - 0.5) <= 1e-6);
  // straight: every joint on the segment from base towards the target
  const Vec3 dir = target.normalized();
  CHECK((g.positions[1] - 0.3 * dir).norm() < 1e-3);
  CHECK((g.positions[2] - 0.6 * dir).norm() < 1e-3);
}

TEST_CASE("ik: objective never increases; all-invalid holds") {
  std::mt19937_64 rng(31);
  const Skeleton& s = Skeleton::smpl22();
  for (int i = 0; i < 20; ++i) {
    const Pose gt = random_pose(rng, 22, 0.8).pose;
    std::vector<Vec3> targets = forward_kinematics(s, gt).positions;
    for (Vec3& t : targets) t += 0.02 * random_unit(rng);
    std::vector<bool> valid(22, true);
    valid[static_cast<std::size_t>(i) % 22] = false;
    const IkResult r = solve_ik(s, targets, valid, {}, Pose::identity(22));
    for (std::size_t k = 1; k < r.objective_history.size(); ++k) {
      CHECK(r.objective_history[k] <= r.objective_history[k - 1]);
    }
    CHECK(r.iterations <= 100);
    CHECK(valid_pose(r.pose));
  }
  const Pose prev = random_pose(rng, 22, 0.5).pose;
  const IkResult held = solve_ik(s, std::vector<Vec3>(22, Vec3::Zero()), std::vector<bool>(22, false), {}, prev);
  CHECK(held.held);
  CHECK(held.pose == prev);
}

TEST_CASE("ik: predictions are valid and repeatable under degradation") {
  const MotionClip clip = synthesize_clip("deg", 2, SyntheticMotionOptions{1.0, 60.0});
  const IkReconstructor ik(clip.skeleton());
  const DegradationConfig cfg{.delay_frames = 4, .fps_ratio = 3, .noise_std_m = 0.05, .occlusion_prob = 0.05, .seed = 5};
  const auto fused = align(derive_sparse_stream(clip), compose(cartesian_from_clip(clip), cfg));
  const auto a = reconstruct_sequence(ik, fused);
  const auto b = reconstruct_sequence(ik, fused);
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(valid_pose(a[t].pose));
    CHECK(a[t].pose == b[t].pose);
  }
  // fully occluded frames repeat the previous pose
  const auto hidden = align(derive_sparse_stream(clip), apply_occlusion(cartesian_from_clip(clip), 1.0, 1));
  const auto h = reconstruct_sequence(ik, hidden);
  CHECK(h[0].held);
  CHECK(h[0].pose == Pose::identity(22));
}

TEST_CASE("knn: exact match, single entry, clamping") {
  std::mt19937_64 rng(40);
  const Skeleton& s = Skeleton::smpl22();
  const Eigen::MatrixXd db = Eigen::MatrixXd::Random(100, 8);
  std::vector<Pose> poses;
  for (int i = 0; i < 100; ++i) poses.push_back(random_pose(rng, 22).pose);
  KnnReconstructor k1(s, 1);
  k1.fit(db, poses);
  for (int i = 0; i < 100; i += 7) CHECK(k1.predict_features(db.row(i).transpose()) == poses[static_cast<std::size_t>(i)]);

  KnnReconstructor single(s, 3);
  single.fit(db.topRows(1), {poses[0]});
  CHECK(single.effective_k() == 1);
  CHECK(single.predict_features(Eigen::VectorXd::Random(8)) == poses[0]);
  CHECK_THROWS_AS(KnnReconstructor(s, 0), ConfigError);
  KnnReconstructor unfitted(s, 1);
  CHECK_THROWS_AS(unfitted.predict_features(Eigen::VectorXd::Zero(8)), StructuralError);
}

TEST_CASE("knn: brute-force oracle on a 100-entry database") {
  std::mt19937_64 rng(41);
  const Skeleton& s = Skeleton::smpl22();
  Eigen::MatrixXd db(100, 6);
  for (Eigen::Index i = 0; i < db.rows(); ++i) {
    for (Eigen::Index j = 0; j < db.cols(); ++j) db(i, j) = uniform(rng, -1, 1) * static_cast<double>(j + 1);
  }
  std::vector<Pose> poses;
  for (int i = 0; i < 100; ++i) poses.push_back(random_pose(rng, 22).pose);
  KnnReconstructor knn(s, 3);
  knn.fit(db, poses);
  // oracle standardization: population mean and std per column
  const Eigen::RowVectorXd mean = db.colwise().mean();
  const Eigen::RowVectorXd sd = ((db.rowwise() - mean).colwise().squaredNorm() / 100.0).cwiseSqrt();
  for (int q = 0; q < 200; ++q) {
    Eigen::VectorXd query(6);
    for (Eigen::Index j = 0; j < 6; ++j) query[j] = uniform(rng, -1.2, 1.2) * static_cast<double>(j + 1);
    std::vector<std::pair<double, std::size_t>> all;
    for (Eigen::Index i = 0; i < 100; ++i) {
      double d2 = 0.0;
      for (Eigen::Index j = 0; j < 6; ++j) {
        const double a = (db(i, j) - mean[j]) / sd[j];
        const double b = (query[j] - mean[j]) / sd[j];
        d2 += (a - b) * (a - b);
      }
      all.emplace_back(std::sqrt(d2), static_cast<std::size_t>(i));
    }
    std::sort(all.begin(), all.end());
    const auto nn = knn.neighbours(query);
    REQUIRE(nn.size() == 3);
    std::vector<std::pair<std::size_t, double>> oracle;
    for (int k = 0; k < 3; ++k) {
      CHECK(nn[static_cast<std::size_t>(k)].first == all[static_cast<std::size_t>(k)].second);
      CHECK(nn[static_cast<std::size_t>(k)].second == doctest::Approx(all[static_cast<std::size_t>(k)].first).epsilon(1e-12));
      oracle.emplace_back(all[static_cast<std::size_t>(k)].second, all[static_cast<std::size_t>(k)].first);
    }
    const Pose expected = brute_force_blend(oracle, poses);
    const Pose got = knn.predict_features(query);
    CHECK((got.root_translation - expected.root_translation).norm() < 1e-12);
    for (std::size_t j = 0; j < 22; ++j) CHECK(geodesic_angle_deg(got.local_rotations[j], expected.local_rotations[j]) < 1e-9);
  }
}

TEST_CASE("knn: training windows are memorized at k = 1") {
  const std::vector<MotionClip> clips{synthesize_clip("m", 9, SyntheticMotionOptions{2.0, 60.0})};
  KnnReconstructor knn(clips[0].skeleton(), 1);
  knn.fit(clips);
  const auto preds = reconstruct_sequence(knn, clean_frames(clips[0]));
  const MotionClip pred = as_clip(clips[0], preds);
  CHECK(mpjpe(pred, clips[0], BodySubset::of(BodySubsetLabel::kFull, clips[0].skeleton())) == 0.0);
}

TEST_CASE("ridge: planted linear model") {
  std::mt19937_64 rng(50);
  SUBCASE("square system, no intercept") {
    const Eigen::Index n = 40;
    Eigen::MatrixXd x = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) x(i, j) += 0.1 * uniform(rng, -1, 1);
    }
    Eigen::MatrixXd w(n, 5);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -2, 2);
    const RidgeSolution sol = ridge_solve(x, x * w, 0.0, false);
    CHECK((sol.weights - w).norm() / w.norm() <= 1e-8);
    CHECK(sol.intercept.norm() == 0.0);
  }
  SUBCASE("overdetermined with intercept") {
    Eigen::MatrixXd x(200, 12);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -1, 1);
    Eigen::MatrixXd w(12, 3);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -2, 2);
    Eigen::RowVectorXd b(3);
    b << 0.5, -1.0, 2.0;
    const Eigen::MatrixXd y = (x * w).rowwise() + b;
    const RidgeSolution sol = ridge_solve(x, y, 0.0, true);
    CHECK((sol.weights - w).norm() / w.norm() <= 1e-8);
    CHECK((sol.intercept - b).norm() <= 1e-8);
  }
  SUBCASE("rank deficient at lambda 0") {
    Eigen::MatrixXd x(20, 3);
    for (Eigen::Index i = 0; i < 20; ++i) x.row(i) << uniform(rng, -1, 1), uniform(rng, -1, 1), 0.0;
    x.col(2) = x.col(0) + x.col(1);
    try {
      ridge_solve(x, Eigen::MatrixXd::Ones(20, 1), 0.0, false);
      FAIL("expected a singular-system error");
    } catch (const SingularSystemError& e) {
      CHECK(std::string(e.what()).find("lambda > 0") != std::string::npos);
    }
    CHECK_NOTHROW(ridge_solve(x, Eigen::MatrixXd::Ones(20, 1), 0.1, false));
  }
}

TEST_CASE("ridge: shrinkage and zero targets") {
  std::mt19937_64 rng(51);
  Eigen::MatrixXd x(60, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -1, 1);
  Eigen::MatrixXd y(60, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = uniform(rng, -1, 1);
  double last = ridge_solve(x, y, 0.0, true).weights.norm();
  for (double lambda : {1.0, 10.0, 100.0}) {
    const double n = ridge_solve(x, y, lambda, true).weights.norm();
    CHECK(n < last);
    last = n;
  }
  const RidgeSolution zero = ridge_solve(x, Eigen::MatrixXd::Zero(60, 135), 1.0, true);
  CHECK(zero.weights.norm() == 0.0);
  const Pose p = pose_from_targets(zero.intercept.transpose(), 22);
  for (const Rotation& r : p.local_rotations) CHECK(r == Rotation::identity());
  CHECK(p.root_translation == Vec3::Zero());
}

TEST_CASE("ridge: pose targets round trip and reconstructor runs") {
  std::mt19937_64 rng(52);
  const Pose p = random_pose(rng, 22).pose;
  const Pose back = pose_from_targets(pose_targets(p), 22);
  for (std::size_t j = 0; j < 22; ++j) CHECK(geodesic_angle_deg(back.local_rotations[j], p.local_rotations[j]) < 1e-9);
  CHECK(back.root_translation == p.root_translation);

  const std::vector<MotionClip> train{synthesize_clip("t", 20, SyntheticMotionOptions{6.0, 60.0})};
  RidgeReconstructor ridge(train[0].skeleton(), 1.0);
  ridge.fit(train);
  const MotionClip test = synthesize_clip("u", 21, SyntheticMotionOptions{1.0, 60.0});
  const auto preds = reconstruct_sequence(ridge, clean_frames(test));
  for (const Prediction& pr : preds) CHECK(valid_pose(pr.pose));
  const double e = mpjpe(as_clip(test, preds), test, BodySubset::of(BodySubsetLabel::kFull, test.skeleton()));
  CHECK(std::isfinite(e));
  CHECK(e < 50.0);
}
