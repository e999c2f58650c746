#pragma once

#include <vector>

#include "gs4d/energy.hpp"

namespace gs4d {

// First/second-moment adaptive gradient descent settings. Step sizes follow
// the usual splatting ratios; the position step scales with scene extent.
struct OptimizeConfig {
  int iterations = 300;
  double lr_position = 1.6e-4;  // x scene extent (bounding-box diagonal)
  double lr_rotation = 1e-3;
  double lr_scale = 5e-3;
  double lr_opacity = 5e-2;
  double lr_sh_dc = 2.5e-3;
  double lr_sh_rest = 1.25e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  RasterConfig raster;
};

struct OptimizeReport {
  std::vector<EnergyBreakdown> history;  // entry 0 is the init state's energy
  double best_energy = 0.0;
  int best_iteration = 0;
};

// Per-frame refinement of a warped prediction. Adaptive weights are computed
// once from the warped positions (prev frame's warp when `warped_prev` is
// given, else the previous optimized positions) and held fixed. Returns the
// iterate with the lowest recorded total energy, so the result never has
// higher energy than `init`.
FrameState optimize_frame(const FrameState& init, const FrameState& prev,
                          const GaussianGraph& graph, const std::vector<Camera>& cameras,
                          const std::vector<Image>& targets, const EnergyWeights& weights,
                          const OptimizeConfig& config,
                          const std::vector<Vec3>* warped_prev = nullptr,
                          OptimizeReport* report = nullptr);

}  // namespace gs4d
