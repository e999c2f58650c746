#pragma once

#include <cmath>
#include <stdexcept>

#include "gs4d/types.hpp"

namespace gs4d {

// Quaternion with (w, x, y, z) component order. This order is used everywhere,
// including the binary file formats.
struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  Quaternion() = default;
  Quaternion(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  static Quaternion identity() { return {1, 0, 0, 0}; }

  static Quaternion from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n < 1e-300) return identity();
    const double h = 0.5 * angle;
    const double s = std::sin(h) / n;
    return {std::cos(h), axis.x() * s, axis.y() * s, axis.z() * s};
  }

  Vec3 vec() const { return {x, y, z}; }

  double dot(const Quaternion& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }

  Quaternion conjugate() const { return {w, -x, -y, -z}; }

  Quaternion operator+(const Quaternion& o) const { return {w + o.w, x + o.x, y + o.y, z + o.z}; }
  Quaternion operator-(const Quaternion& o) const { return {w - o.w, x - o.x, y - o.y, z - o.z}; }
  Quaternion operator*(double s) const { return {w * s, x * s, y * s, z * s}; }
  Quaternion operator-() const { return {-w, -x, -y, -z}; }

  // Hamilton product.
  Quaternion operator*(const Quaternion& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }

  Quaternion normalized() const {
    const double n = norm();
    if (n < 1e-12) throw std::invalid_argument("quaternion: cannot normalize near-zero quaternion");
    return {w / n, x / n, y / n, z / n};
  }

  // Rotate a vector; assumes *this is unit length.
  Vec3 rotate(const Vec3& v) const {
    const Vec3 u(x, y, z);
    return v + 2.0 * u.cross(u.cross(v) + w * v);
  }
};

// Rotation matrix of q / |q|. Rejects the zero quaternion.
inline Mat3 quat_to_rot(const Quaternion& q) {
  const Quaternion n = q.normalized();
  const double w = n.w, x = n.x, y = n.y, z = n.z;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

// Shepperd's method; returns a unit quaternion with non-negative w.
inline Quaternion quat_from_rot(const Mat3& r) {
  Quaternion q;
  const double tr = r.trace();
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s};
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s};
  }
  q = q.normalized();
  return q.w < 0.0 ? -q : q;
}

// dL/dq for a loss depending on quat_to_rot(q), given the full-matrix
// gradient dL/dR. Accounts for the normalization inside quat_to_rot.
inline Vec4 quat_rot_backward(const Quaternion& q, const Mat3& g) {
  const double n = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
  const double w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;
  Vec4 gu;  // gradient w.r.t. the unit components
  gu(0) = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) +
                 x * g(2, 1));
  gu(1) = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) +
                 z * g(2, 0) + w * g(2, 1) - 2.0 * x * g(2, 2));
  gu(2) = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
                 w * g(2, 0) + z * g(2, 1) - 2.0 * y * g(2, 2));
  gu(3) = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) -
                 2.0 * z * g(1, 1) + y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  const Vec4 u(w, x, y, z);
  return (gu - u * u.dot(gu)) / n;
}

// Matrix M(k) with (p * k) = M(k) * p over (w, x, y, z) components; the
// adjoint of right-multiplication, used to backpropagate through products.
inline Mat4 quat_right_mul_matrix(const Quaternion& k) {
  Mat4 m;
  m << k.w, -k.x, -k.y, -k.z,  //
      k.x, k.w, k.z, -k.y,     //
      k.y, -k.z, k.w, k.x,     //
      k.z, k.y, -k.x, k.w;
  return m;
}

// SE(3) element as an orthonormal rotation plus translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  RigidTransform compose(const RigidTransform& inner) const {
    // (*this) after inner: p -> R_outer (R_inner p + t_inner) + t_outer
    return {rotation * inner.rotation, rotation * inner.translation + translation};
  }

  RigidTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }

  bool is_orthonormal(double tol = 1e-6) const {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

// Rodrigues: exp of so(3).
inline Mat3 rotation_exp(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) return Mat3::Identity() + skew(omega);
  const Vec3 a = omega / theta;
  const Mat3 k = skew(a);
  return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * (k * k);
}

// Unit dual quaternion: |real| = 1 and <real, dual> = 0 after normalization.
struct DualQuaternion {
  Quaternion real = Quaternion::identity();
  Quaternion dual = {0, 0, 0, 0};

  static DualQuaternion identity() { return {}; }

  DualQuaternion operator+(const DualQuaternion& o) const { return {real + o.real, dual + o.dual}; }
  DualQuaternion operator*(double s) const { return {real * s, dual * s}; }

  DualQuaternion operator*(const DualQuaternion& o) const {
    return {real * o.real, real * o.dual + dual * o.real};
  }

  DualQuaternion normalized() const {
    const double n = real.norm();
    if (n < 1e-12) throw std::invalid_argument("dual quaternion: zero-norm real part");
    Quaternion r{real.w / n, real.x / n, real.y / n, real.z / n};
    Quaternion d{dual.w / n, dual.x / n, dual.y / n, dual.z / n};
    d = d - r * r.dot(d);  // enforce <r, d> = 0
    return {r, d};
  }
};

// Unit rotation component of a normalized dual quaternion (ROT of the warp).
inline Quaternion rot_of(const DualQuaternion& dq) { return dq.real.normalized(); }

inline DualQuaternion dq_from_rigid(const RigidTransform& t) {
  if (!t.is_orthonormal()) {
    throw std::invalid_argument("dq_from_rigid: rotation is not orthonormal with det +1");
  }
  const Quaternion r = quat_from_rot(t.rotation);
  const Quaternion tq{0, t.translation.x(), t.translation.y(), t.translation.z()};
  return {r, (tq * r) * 0.5};
}

inline RigidTransform dq_to_rigid(const DualQuaternion& dq) {
  const DualQuaternion n = dq.normalized();
  const Quaternion tq = (n.dual * 2.0) * n.real.conjugate();
  return {quat_to_rot(n.real), tq.vec()};
}

// Point action of a (not necessarily normalized) dual quaternion.
inline Vec3 dq_transform_point(const DualQuaternion& dq, const Vec3& p) {
  const DualQuaternion n = dq.normalized();
  return n.real.rotate(p) + ((n.dual * 2.0) * n.real.conjugate()).vec();
}

}  // namespace gs4d
