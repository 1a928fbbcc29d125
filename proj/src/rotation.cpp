#include "avbench/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "avbench/error.hpp"

namespace avbench {

namespace {

constexpr double kUnitTolerance = 1e-6;

bool finite(const Eigen::Quaterniond& q) { return q.coeffs().allFinite(); }

Eigen::Quaterniond checked_unit(const Eigen::Quaterniond& q) {
  if (!finite(q)) throw InvalidRotationError("quaternion has non-finite components");
  const double n = q.norm();
  if (std::abs(n - 1.0) >= kUnitTolerance) {
    throw InvalidRotationError("quaternion norm " + std::to_string(n) + " is not unit");
  }
  return Eigen::Quaterniond(q.coeffs() / n);
}

}  // namespace

Eigen::Quaterniond Rotation::canonical(Eigen::Quaterniond q) {
  // leave already-unit input untouched so stored values survive reloading bit-exactly
  if (std::abs(q.squaredNorm() - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

Rotation Rotation::from_wxyz(double w, double x, double y, double z) {
  const Eigen::Quaterniond q(w, x, y, z);
  checked_unit(q);
  return Rotation(canonical(q));
}

Rotation Rotation::normalized(const Eigen::Quaterniond& q) {
  if (!finite(q)) throw InvalidRotationError("quaternion has non-finite components");
  if (q.norm() < 1e-300) throw InvalidRotationError("cannot normalize a zero quaternion");
  return Rotation(canonical(q));
}

Rotation Rotation::from_axis_angle(const Vec3& axis, double angle_rad) {
  const double n = axis.norm();
  if (!(n > 0.0) || !std::isfinite(angle_rad)) {
    throw InvalidRotationError("axis-angle needs a nonzero finite axis");
  }
  return Rotation(canonical(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis / n))));
}

Rotation Rotation::from_rotation_vector(const Vec3& v) {
  const double angle = v.norm();
  if (!std::isfinite(angle)) throw InvalidRotationError("rotation vector is not finite");
  if (angle < 1e-300) return identity();
  // exp map; the half-angle form stays accurate for small angles
  const double half = 0.5 * angle;
  const double s = std::sin(half) / angle;
  return Rotation(canonical(Eigen::Quaterniond(std::cos(half), v.x() * s, v.y() * s, v.z() * s)));
}

Rotation Rotation::from_matrix(const Mat3& m) {
  if (!m.allFinite()) throw InvalidRotationError("rotation matrix is not finite");
  return Rotation(canonical(Eigen::Quaterniond(m)));
}

Rotation Rotation::from_6d(const Vec6& six) {
  const Vec3 a = six.head<3>();
  const Vec3 b = six.tail<3>();
  const double na = a.norm();
  if (!six.allFinite() || na < 1e-12) {
    throw InvalidRotationError("6D rotation has a degenerate first column");
  }
  const Vec3 c0 = a / na;
  const Vec3 b_perp = b - c0.dot(b) * c0;
  const double nb = b_perp.norm();
  if (nb < 1e-12 * std::max(1.0, b.norm())) {
    throw InvalidRotationError("6D rotation columns are parallel");
  }
  const Vec3 c1 = b_perp / nb;
  Mat3 m;
  m.col(0) = c0;
  m.col(1) = c1;
  m.col(2) = c0.cross(c1);
  return from_matrix(m);
}

Vec6 Rotation::to_6d() const {
  const Mat3 m = matrix();
  Vec6 out;
  out << m.col(0), m.col(1);
  return out;
}

Vec3 Rotation::to_rotation_vector() const {
  const Vec3 v = q_.vec();
  const double s = v.norm();
  if (s < 1e-300) return Vec3::Zero();
  // q_.w() >= 0 so the angle lies in [0, pi]
  const double angle = 2.0 * std::atan2(s, q_.w());
  return v * (angle / s);
}

Rotation Rotation::inverse() const { return Rotation(canonical(q_.conjugate())); }

Rotation operator*(const Rotation& a, const Rotation& b) {
  return Rotation(Rotation::canonical(a.q_ * b.q_));
}

double geodesic_angle_deg(const Rotation& a, const Rotation& b) {
  return geodesic_angle_deg(a.quaternion(), b.quaternion());
}

double geodesic_angle_deg(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const Eigen::Quaterniond ua = checked_unit(a);
  const Eigen::Quaterniond ub = checked_unit(b);
  // atan2 form of 2*acos(|<a,b>|): well conditioned near 0 and 180 degrees
  const Eigen::Quaterniond rel = ua.conjugate() * ub;
  const double angle = 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
  return rad_to_deg(angle);
}

}  // namespace avbench
