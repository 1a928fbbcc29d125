#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace avbench {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Unit quaternion stored w-first with the canonical sign w >= 0.
///
/// Every constructor and operation renormalizes, so the unit-norm invariant
/// holds to rounding after any sequence of operations.
class Rotation {
 public:
  Rotation() = default;

  static Rotation identity() { return {}; }

  /// Accepts a quaternion whose norm deviates from 1 by less than 1e-6 and
  /// renormalizes it. Larger deviations and non-finite input throw
  /// InvalidRotationError.
  static Rotation from_wxyz(double w, double x, double y, double z);

  /// Normalizes any nonzero finite quaternion; throws on zero or non-finite input.
  static Rotation normalized(const Eigen::Quaterniond& q);

  static Rotation from_axis_angle(const Vec3& axis, double angle_rad);
  /// Rotation vector (axis * angle). Zero maps to identity.
  static Rotation from_rotation_vector(const Vec3& v);
  static Rotation from_matrix(const Mat3& m);
  /// Gram-Schmidt on the two stored columns; throws InvalidRotationError when
  /// either column is (near) zero or the columns are (near) parallel.
  static Rotation from_6d(const Vec6& six);

  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }
  std::array<double, 4> wxyz() const { return {q_.w(), q_.x(), q_.y(), q_.z()}; }
  const Eigen::Quaterniond& quaternion() const { return q_; }

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  /// First two columns of the rotation matrix, column-major.
  Vec6 to_6d() const;
  /// Axis * angle with angle in [0, pi].
  Vec3 to_rotation_vector() const;

  Rotation inverse() const;
  Vec3 rotate(const Vec3& v) const { return q_ * v; }

  friend Rotation operator*(const Rotation& a, const Rotation& b);
  friend Vec3 operator*(const Rotation& r, const Vec3& v) { return r.rotate(v); }
  friend bool operator==(const Rotation& a, const Rotation& b) {
    return a.q_.coeffs() == b.q_.coeffs();
  }

 private:
  explicit Rotation(const Eigen::Quaterniond& unit) : q_(unit) {}
  static Eigen::Quaterniond canonical(Eigen::Quaterniond q);

  Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
};

/// Angle of the relative rotation between a and b, in degrees within [0, 180].
double geodesic_angle_deg(const Rotation& a, const Rotation& b);

/// Raw-quaternion variant: normalizes inputs whose norm is within 1e-6 of one
/// and throws InvalidRotationError otherwise.
double geodesic_angle_deg(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

constexpr double kPi = 3.14159265358979323846;
constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace avbench
