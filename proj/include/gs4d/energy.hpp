#pragma once

#include <vector>

#include "gs4d/camera.hpp"
#include "gs4d/gaussian_graph.hpp"
#include "gs4d/image.hpp"
#include "gs4d/kernel.hpp"
#include "gs4d/rasterizer.hpp"
#include "gs4d/types.hpp"

namespace gs4d {

// Regularizer weights. Defaults are the empirically determined values the
// method ships with.
struct EnergyWeights {
  double lambda_sh = 1.0;
  double lambda_opacity = 0.05;
  double lambda_scale = 0.05;
  double lambda_smooth = 0.002;
  double lambda_temp = 0.0005;
  double lambda_color = 1.0;
  double alpha = 50.0;  // displacement sensitivity of the adaptive weights
};

// w_i = exp(-alpha * ||p'_t - p'_{t-1}||^2), from warped (predicted) positions.
std::vector<double> adaptive_weights(const std::vector<Vec3>& warped_prev,
                                     const std::vector<Vec3>& warped_cur, double alpha);

// Temporal appearance term: sum_i w_i * (lambda_sh*||dC||^2 +
// lambda_opacity*dsigma^2 + lambda_scale*||ds||^2), differences vs. prev.
double e_temp(const FrameState& cur, const FrameState& prev, const std::vector<double>& w,
              const EnergyWeights& weights);

// As e_temp, additionally accumulating scale * d(e_temp)/d(cur attributes).
double e_temp_grad(const FrameState& cur, const FrameState& prev, const std::vector<double>& w,
                   const EnergyWeights& weights, double scale, KernelGrads& grads);

// Local rigidity term over the kernel neighborhoods:
// sum_i sum_{j in N(i)} w_i * ||R(q_{i,t} q_{i,t-1}^-1)(p_{j,t-1} - p_{i,t-1})
//                              - (p_{j,t} - p_{i,t})||^2.
double e_smooth(const FrameState& cur, const FrameState& prev, const GaussianGraph& graph,
                const std::vector<double>& w);

double e_smooth_grad(const FrameState& cur, const FrameState& prev, const GaussianGraph& graph,
                     const std::vector<double>& w, double scale, KernelGrads& grads);

struct EnergyBreakdown {
  double total = 0.0;
  double temp = 0.0;
  double smooth = 0.0;
  double color = 0.0;  // summed over the camera set
};

// Full objective: lambda_temp*E_temp + lambda_smooth*E_smooth +
// lambda_color*sum_cams E_color. When grads is non-null it is overwritten
// with d(total)/d(cur attributes).
EnergyBreakdown total_energy(const FrameState& cur, const FrameState& prev,
                             const GaussianGraph& graph, const std::vector<Camera>& cameras,
                             const std::vector<Image>& targets, const std::vector<double>& w,
                             const EnergyWeights& weights, const RasterConfig& raster,
                             KernelGrads* grads);

}  // namespace gs4d
