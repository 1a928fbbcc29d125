#include "avbench/sensor_sim.hpp"

#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "avbench/error.hpp"
#include "avbench/seeding.hpp"

namespace avbench {

namespace {

double frame_timestamp(std::size_t frame, double framerate) { return static_cast<double>(frame) / framerate; }

}  // namespace

SparseStream derive_sparse_stream(const MotionClip& clip) {
  const Skeleton& sk = clip.skeleton();
  std::array<std::size_t, kTrackedJointCount> idx{};
  for (std::size_t k = 0; k < kTrackedJointCount; ++k) idx[k] = sk.index_of(kTrackedJointNames[k]);

  SparseStream stream;
  stream.framerate = clip.framerate();
  stream.samples.reserve(clip.frame_count());
  for (std::size_t t = 0; t < clip.frame_count(); ++t) {
    const GlobalPose g = forward_kinematics(sk, clip.pose(t));
    SparseSample s;
    s.timestamp = frame_timestamp(t, clip.framerate());
    for (std::size_t k = 0; k < kTrackedJointCount; ++k) {
      s.joints[k].position = g.positions[idx[k]];
      s.joints[k].orientation = g.rotations[idx[k]];
    }
    if (t > 0) {
      const SparseSample& prev = stream.samples.back();
      for (std::size_t k = 0; k < kTrackedJointCount; ++k) {
        TrackedState& cur = s.joints[k];
        const TrackedState& p = prev.joints[k];
        cur.linear_velocity = (cur.position - p.position) * clip.framerate();
        // body-frame delta q[t-1]^-1 q[t], rotated into the global frame by q[t-1]
        const Rotation body_delta = p.orientation.inverse() * cur.orientation;
        cur.angular_velocity = p.orientation.rotate(body_delta.to_rotation_vector()) * clip.framerate();
      }
    }
    stream.samples.push_back(s);
  }
  return stream;
}

CartesianStream cartesian_from_clip(const MotionClip& clip) {
  CartesianStream stream;
  stream.framerate = clip.framerate();
  stream.samples.reserve(clip.frame_count());
  for (std::size_t t = 0; t < clip.frame_count(); ++t) {
    CartesianSample s;
    s.timestamp = frame_timestamp(t, clip.framerate());
    s.capture_time = s.timestamp;
    s.positions = forward_kinematics(clip.skeleton(), clip.pose(t)).positions;
    s.valid.assign(s.positions.size(), true);
    stream.samples.push_back(std::move(s));
  }
  return stream;
}

// ---------------------------------------------------------------------------
// cameras

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw ConfigError("camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) throw ConfigError("camera image size must be positive");
  if (!(cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height)) {
    throw ConfigError("camera principal point lies outside the image");
  }
  if (!center.allFinite()) throw ConfigError("camera center is not finite");
}

CameraModel CameraModel::look_at(const Vec3& center, const Vec3& target, const Vec3& world_up, double focal_px,
                                 int width, int height) {
  const Vec3 forward = (target - center).normalized();
  const Vec3 right_raw = forward.cross(world_up);
  if (right_raw.norm() < 1e-9) throw ConfigError("look_at: viewing direction is parallel to the up vector");
  const Vec3 right = right_raw.normalized();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  CameraModel cam;
  cam.fx = cam.fy = focal_px;
  cam.width = width;
  cam.height = height;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.rotation = Rotation::from_matrix(r);
  cam.center = center;
  return cam;
}

Eigen::Matrix<double, 3, 4> CameraModel::projection_matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  const Mat3 rt = rotation.matrix().transpose();
  Eigen::Matrix<double, 3, 4> ext;
  ext.leftCols<3>() = rt;
  ext.col(3) = -rt * center;
  return k * ext;
}

std::array<CameraModel, 2> default_camera_rig() {
  const Vec3 target(0.0, 1.0, 0.0);
  return {CameraModel::look_at(Vec3(0.0, 2.5, 3.0), target), CameraModel::look_at(Vec3(3.0, 2.5, 0.0), target)};
}

std::optional<Vec2> project(const CameraModel& camera, const Vec3& point) {
  const Vec3 pc = camera.rotation.matrix().transpose() * (point - camera.center);
  if (!(pc.z() > 1e-6)) return std::nullopt;
  return Vec2(camera.fx * pc.x() / pc.z() + camera.cx, camera.fy * pc.y() / pc.z() + camera.cy);
}

DetectionStream synthesize_detections(const MotionClip& clip, const CameraModel& camera, const DetectorModel& model) {
  camera.validate();
  if (!(model.pixel_noise_std >= 0.0) || !(model.miss_prob >= 0.0 && model.miss_prob <= 1.0)) {
    throw ConfigError("detector noise must be >= 0 and miss probability within [0, 1]");
  }
  DetectionStream out;
  out.framerate = clip.framerate();
  out.frames.reserve(clip.frame_count());
  const std::uint64_t stream_seed = derive_seed(model.seed, 0xD37EC7);
  for (std::size_t t = 0; t < clip.frame_count(); ++t) {
    const auto positions = forward_kinematics(clip.skeleton(), clip.pose(t)).positions;
    auto engine = frame_engine(stream_seed, t);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Detection2D det;
    det.timestamp = frame_timestamp(t, clip.framerate());
    det.pixels.resize(positions.size(), Vec2::Zero());
    det.visible.assign(positions.size(), false);
    det.in_image.assign(positions.size(), false);
    for (std::size_t j = 0; j < positions.size(); ++j) {
      // fixed draw order per joint keeps streams aligned across parameter changes
      const double nu = gauss(engine);
      const double nv = gauss(engine);
      const double miss = uniform01(engine);
      const auto px = project(camera, positions[j]);
      if (!px || miss < model.miss_prob) continue;
      Vec2 p = *px;
      if (model.pixel_noise_std > 0.0) p += model.pixel_noise_std * Vec2(nu, nv);
      det.pixels[j] = p;
      det.visible[j] = true;
      det.in_image[j] = p.x() >= 0.0 && p.x() < camera.width && p.y() >= 0.0 && p.y() < camera.height;
    }
    out.frames.push_back(std::move(det));
  }
  return out;
}

Vec3 triangulate(const CameraModel& cam_a, const CameraModel& cam_b, const Vec2& px_a, const Vec2& px_b) {
  if ((cam_a.center - cam_b.center).norm() < 1e-6) {
    throw DegenerateGeometryError("camera centers coincide; baseline below 1e-6 m");
  }
  const auto pa = cam_a.projection_matrix();
  const auto pb = cam_b.projection_matrix();
  Eigen::Matrix4d a;
  a.row(0) = px_a.x() * pa.row(2) - pa.row(0);
  a.row(1) = px_a.y() * pa.row(2) - pa.row(1);
  a.row(2) = px_b.x() * pb.row(2) - pb.row(0);
  a.row(3) = px_b.y() * pb.row(2) - pb.row(1);
  for (int r = 0; r < 4; ++r) {
    const double n = a.row(r).norm();
    if (n > 0.0) a.row(r) /= n;
  }
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d s = svd.singularValues();
  // the exact solution spans the null space (s[3] ~ 0); a second vanishing
  // singular value means the two rays do not pin down a point
  if (!(s[0] > 0.0) || s[2] < 1e-10 * s[0]) {
    throw DegenerateGeometryError("triangulation rays are near parallel");
  }
  const Eigen::Vector4d x = svd.matrixV().col(3);
  if (std::abs(x[3]) < 1e-12 * x.head<3>().norm()) {
    throw DegenerateGeometryError("triangulated point lies at infinity");
  }
  return x.head<3>() / x[3];
}

CartesianStream reconstruct_cartesian_stream(const DetectionStream& a, const DetectionStream& b,
                                             const CameraModel& cam_a, const CameraModel& cam_b) {
  if (a.frames.size() != b.frames.size()) {
    throw StructuralError("detection streams differ in length (" + std::to_string(a.frames.size()) + " vs " +
                          std::to_string(b.frames.size()) + ")");
  }
  CartesianStream out;
  out.framerate = a.framerate;
  out.samples.reserve(a.frames.size());
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    const Detection2D& da = a.frames[t];
    const Detection2D& db = b.frames[t];
    if (da.pixels.size() != db.pixels.size()) throw StructuralError("detection frames differ in joint count");
    CartesianSample s;
    s.timestamp = da.timestamp;
    s.capture_time = da.timestamp;
    s.positions.assign(da.pixels.size(), Vec3::Zero());
    s.valid.assign(da.pixels.size(), false);
    for (std::size_t j = 0; j < da.pixels.size(); ++j) {
      if (!da.visible[j] || !db.visible[j]) continue;
      try {
        s.positions[j] = triangulate(cam_a, cam_b, da.pixels[j], db.pixels[j]);
        s.valid[j] = true;
      } catch (const DegenerateGeometryError&) {
        // leave the joint invalid
      }
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace avbench
