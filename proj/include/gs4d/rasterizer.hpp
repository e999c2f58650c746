#pragma once

#include <optional>
#include <vector>

#include "gs4d/camera.hpp"
#include "gs4d/image.hpp"
#include "gs4d/kernel.hpp"
#include "gs4d/types.hpp"

namespace gs4d {

struct RasterConfig {
  double near_plane = 0.01;        // camera-space z cull threshold
  double footprint_sigma = 3.0;    // half-extent of the splat bounding box, in sigmas
  double min_alpha = 1.0 / 255.0;  // contributions below this are skipped
  double alpha_clamp = 0.99;       // per-splat alpha ceiling
  double stop_transmittance = 1e-4;
  double dilation = 0.3;           // isotropic 2D covariance dilation, px^2
  int threads = 0;                 // 0 = auto
};

// One kernel projected into a camera, with everything the per-pixel loop and
// the backward pass need cached.
struct SplatFragment {
  int kernel = -1;
  Vec2 mean = Vec2::Zero();  // pixel coordinates
  double conic_a = 0.0, conic_b = 0.0, conic_c = 0.0;  // inverse 2D covariance
  double depth = 0.0;        // camera-space z
  Vec3 rgb = Vec3::Zero();   // view-dependent color, clamped to >= 0
  double opacity = 0.0;      // sigmoid-activated
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;  // clipped pixel rect, half-open
  // Cached intermediates for the backward pass.
  Vec3 x_cam = Vec3::Zero();
  Vec3 dir = Vec3::Zero();   // unit direction camera center -> kernel
  double dir_len = 0.0;
  Mat2 cov = Mat2::Zero();   // dilated 2D covariance
};

// Per-parameter-class gradients for a frame, laid out flat per kernel.
struct KernelGrads {
  std::vector<Vec3> position;
  std::vector<Vec4> rotation;  // (w, x, y, z)
  std::vector<Vec3> log_scale;
  std::vector<double> opacity;
  std::vector<double> sh;  // kernel-major, sh_value_count() per kernel

  void resize(size_t kernels, size_t sh_values);
  void set_zero();
  void add(const KernelGrads& other);
};

// Projects one kernel; nullopt when culled (behind the near plane or the
// 3-sigma footprint misses the image).
std::optional<SplatFragment> project(const GaussianKernel& kernel, const Camera& camera,
                                     const RasterConfig& config);

// Front-to-back alpha compositing over a black background.
Image rasterize(const std::vector<GaussianKernel>& kernels, const Camera& camera,
                const RasterConfig& config);

// Mean absolute error between the rendering and the target image.
double e_color(const std::vector<GaussianKernel>& kernels, const Camera& camera,
               const Image& target, const RasterConfig& config);

// As e_color, but also accumulates (+=) analytic gradients of the loss with
// respect to every kernel attribute into `grads`. When `rendered` is non-null
// the forward image is written there.
double e_color_grad(const std::vector<GaussianKernel>& kernels, const Camera& camera,
                    const Image& target, const RasterConfig& config, KernelGrads& grads,
                    Image* rendered = nullptr);

}  // namespace gs4d
