#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "gs4d/types.hpp"

namespace gs4d {

// Real spherical harmonics in the standard splatting convention, degree 0..3.
// Coefficients are stored interleaved: index = basis * 3 + channel.

constexpr int kMaxShDegree = 3;

inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }
inline int sh_value_count(int degree) { return 3 * sh_coeff_count(degree); }

inline int sh_degree_from_value_count(size_t values) {
  for (int d = 0; d <= kMaxShDegree; ++d) {
    if (static_cast<size_t>(sh_value_count(d)) == values) return d;
  }
  throw std::invalid_argument("sh: coefficient vector length is not 3*(L+1)^2 for L in 0..3");
}

namespace sh_detail {
constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr std::array<double, 5> kC2 = {1.0925484305920792, -1.0925484305920792,
                                       0.31539156525252005, -1.0925484305920792,
                                       0.5462742152960396};
constexpr std::array<double, 7> kC3 = {-0.5900435899266435, 2.890611442640554,
                                       -0.4570457994644658, 0.3731763325901154,
                                       -0.4570457994644658, 1.445305721320277,
                                       -0.5900435899266435};
}  // namespace sh_detail

// Basis values at a unit direction; out must hold sh_coeff_count(degree).
inline void sh_basis(int degree, const Vec3& dir, double* out) {
  using namespace sh_detail;
  const double x = dir.x(), y = dir.y(), z = dir.z();
  out[0] = kC0;
  if (degree < 1) return;
  out[1] = -kC1 * y;
  out[2] = kC1 * z;
  out[3] = -kC1 * x;
  if (degree < 2) return;
  const double xx = x * x, yy = y * y, zz = z * z;
  const double xy = x * y, yz = y * z, xz = x * z;
  out[4] = kC2[0] * xy;
  out[5] = kC2[1] * yz;
  out[6] = kC2[2] * (2.0 * zz - xx - yy);
  out[7] = kC2[3] * xz;
  out[8] = kC2[4] * (xx - yy);
  if (degree < 3) return;
  out[9] = kC3[0] * y * (3.0 * xx - yy);
  out[10] = kC3[1] * xy * z;
  out[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  out[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  out[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  out[14] = kC3[5] * z * (xx - yy);
  out[15] = kC3[6] * x * (xx - 3.0 * yy);
}

// Partials of each basis value w.r.t. the raw direction components.
// grad must hold sh_coeff_count(degree) rows of 3.
inline void sh_basis_grad(int degree, const Vec3& dir, Vec3* grad) {
  using namespace sh_detail;
  const double x = dir.x(), y = dir.y(), z = dir.z();
  grad[0] = Vec3::Zero();
  if (degree < 1) return;
  grad[1] = {0, -kC1, 0};
  grad[2] = {0, 0, kC1};
  grad[3] = {-kC1, 0, 0};
  if (degree < 2) return;
  grad[4] = {kC2[0] * y, kC2[0] * x, 0};
  grad[5] = {0, kC2[1] * z, kC2[1] * y};
  grad[6] = {-2.0 * kC2[2] * x, -2.0 * kC2[2] * y, 4.0 * kC2[2] * z};
  grad[7] = {kC2[3] * z, 0, kC2[3] * x};
  grad[8] = {2.0 * kC2[4] * x, -2.0 * kC2[4] * y, 0};
  if (degree < 3) return;
  const double xx = x * x, yy = y * y, zz = z * z;
  grad[9] = {kC3[0] * 6.0 * x * y, kC3[0] * (3.0 * xx - 3.0 * yy), 0};
  grad[10] = {kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y};
  grad[11] = {-2.0 * kC3[2] * x * y, kC3[2] * (4.0 * zz - xx - 3.0 * yy), kC3[2] * 8.0 * y * z};
  grad[12] = {-6.0 * kC3[3] * x * z, -6.0 * kC3[3] * y * z, kC3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)};
  grad[13] = {kC3[4] * (4.0 * zz - 3.0 * xx - yy), -2.0 * kC3[4] * x * y, kC3[4] * 8.0 * x * z};
  grad[14] = {2.0 * kC3[5] * x * z, -2.0 * kC3[5] * y * z, kC3[5] * (xx - yy)};
  grad[15] = {kC3[6] * (3.0 * xx - 3.0 * yy), -6.0 * kC3[6] * x * y, 0};
}

// Color at a unit view direction: clamp(sum_j c_j * Y_j(dir) + 0.5, 0).
inline Vec3 sh_eval(const std::vector<double>& coeffs, const Vec3& dir) {
  const int degree = sh_degree_from_value_count(coeffs.size());
  double basis[16];
  sh_basis(degree, dir, basis);
  Vec3 rgb = Vec3::Zero();
  const int n = sh_coeff_count(degree);
  for (int j = 0; j < n; ++j) {
    rgb.x() += coeffs[j * 3 + 0] * basis[j];
    rgb.y() += coeffs[j * 3 + 1] * basis[j];
    rgb.z() += coeffs[j * 3 + 2] * basis[j];
  }
  rgb.array() += 0.5;
  return rgb.cwiseMax(0.0);
}

}  // namespace gs4d
