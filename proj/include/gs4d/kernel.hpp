#pragma once

#include <stdexcept>
#include <vector>

#include "gs4d/quaternion.hpp"
#include "gs4d/sh.hpp"
#include "gs4d/types.hpp"

namespace gs4d {

// One splat. Scale is stored as log-scale per axis; opacity as a logit.
// SH coefficients are interleaved (basis * 3 + channel), see sh.hpp.
struct GaussianKernel {
  Vec3 position = Vec3::Zero();
  Quaternion rotation = Quaternion::identity();
  Vec3 log_scale = Vec3::Zero();
  double opacity_logit = 0.0;
  std::vector<double> sh;

  int sh_degree() const { return sh_degree_from_value_count(sh.size()); }
};

// All kernels of one frame. Kernel count and identity are fixed within a segment.
struct FrameState {
  int frame_index = 0;
  std::vector<GaussianKernel> kernels;

  size_t size() const { return kernels.size(); }

  int sh_degree() const {
    if (kernels.empty()) throw std::runtime_error("FrameState: empty frame has no SH degree");
    return kernels.front().sh_degree();
  }
};

// Number of 32-bit reals per kernel in the raw on-disk layout:
// p(3) + q(4) + s(3) + opacity(1) + SH(3*(L+1)^2).
inline size_t floats_per_kernel(int sh_degree) {
  return 11 + static_cast<size_t>(sh_value_count(sh_degree));
}

// Raw storage of one frame at 32-bit precision.
inline size_t raw_frame_bytes(size_t kernel_count, int sh_degree) {
  return kernel_count * floats_per_kernel(sh_degree) * 4;
}

}  // namespace gs4d
