#include "gs4d/optimizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gs4d {
namespace {

// Flat Adam state over all parameters of a frame, shaped like KernelGrads.
struct Moments {
  KernelGrads m, v;
};

double scene_extent(const FrameState& frame) {
  Vec3 lo = frame.kernels.front().position, hi = lo;
  for (const GaussianKernel& k : frame.kernels) {
    lo = lo.cwiseMin(k.position);
    hi = hi.cwiseMax(k.position);
  }
  const double d = (hi - lo).norm();
  return d > 0.0 ? d : 1.0;
}

int first_non_finite_kernel(const FrameState& frame, const KernelGrads& grads) {
  for (size_t i = 0; i < frame.size(); ++i) {
    const GaussianKernel& k = frame.kernels[i];
    bool ok = k.position.allFinite() && k.log_scale.allFinite() &&
              std::isfinite(k.opacity_logit) && std::isfinite(k.rotation.w) &&
              std::isfinite(k.rotation.x) && std::isfinite(k.rotation.y) &&
              std::isfinite(k.rotation.z);
    for (double v : k.sh) ok = ok && std::isfinite(v);
    ok = ok && grads.position[i].allFinite() && grads.rotation[i].allFinite() &&
         grads.log_scale[i].allFinite() && std::isfinite(grads.opacity[i]);
    for (size_t j = 0; j < k.sh.size(); ++j) {
      ok = ok && std::isfinite(grads.sh[i * k.sh.size() + j]);
    }
    if (!ok) return static_cast<int>(i);
  }
  return -1;
}

inline double adam_step(double g, double& m, double& v, double lr, const OptimizeConfig& c,
                        double bc1, double bc2) {
  m = c.beta1 * m + (1.0 - c.beta1) * g;
  v = c.beta2 * v + (1.0 - c.beta2) * g * g;
  return lr * (m / bc1) / (std::sqrt(v / bc2) + c.eps);
}

}  // namespace

FrameState optimize_frame(const FrameState& init, const FrameState& prev,
                          const GaussianGraph& graph, const std::vector<Camera>& cameras,
                          const std::vector<Image>& targets, const EnergyWeights& weights,
                          const OptimizeConfig& config, const std::vector<Vec3>* warped_prev,
                          OptimizeReport* report) {
  if (init.kernels.empty()) throw std::invalid_argument("optimize_frame: empty frame");
  if (config.iterations < 0) throw std::invalid_argument("optimize_frame: negative iterations");

  std::vector<Vec3> cur_pos(init.size()), prev_pos(init.size());
  for (size_t i = 0; i < init.size(); ++i) cur_pos[i] = init.kernels[i].position;
  if (warped_prev) {
    prev_pos = *warped_prev;
  } else {
    if (prev.size() != init.size()) {
      throw std::invalid_argument("optimize_frame: frame kernel counts differ");
    }
    for (size_t i = 0; i < init.size(); ++i) prev_pos[i] = prev.kernels[i].position;
  }
  const std::vector<double> w = adaptive_weights(prev_pos, cur_pos, weights.alpha);

  const size_t sh_values = init.kernels.front().sh.size();
  const double lr_pos = config.lr_position * scene_extent(init);

  FrameState cur = init;
  FrameState best = init;
  double best_energy = std::numeric_limits<double>::infinity();
  int best_iteration = 0;

  Moments mom;
  mom.m.resize(init.size(), sh_values);
  mom.v.resize(init.size(), sh_values);
  KernelGrads grads;

  if (report) {
    report->history.clear();
    report->history.reserve(config.iterations + 1);
  }

  for (int it = 0; it <= config.iterations; ++it) {
    const bool last = it == config.iterations;
    const EnergyBreakdown e = total_energy(cur, prev, graph, cameras, targets, w, weights,
                                           config.raster, last ? nullptr : &grads);
    if (!std::isfinite(e.total)) {
      const int bad = first_non_finite_kernel(cur, last ? mom.m : grads);
      throw std::runtime_error("optimize_frame: non-finite energy at iteration " +
                               std::to_string(it) + " (kernel " +
                               std::to_string(bad < 0 ? 0 : bad) + ")");
    }
    if (report) report->history.push_back(e);
    if (e.total < best_energy) {
      best_energy = e.total;
      best = cur;
      best_iteration = it;
    }
    if (last) break;

    const double bc1 = 1.0 - std::pow(config.beta1, it + 1);
    const double bc2 = 1.0 - std::pow(config.beta2, it + 1);
    for (size_t i = 0; i < cur.size(); ++i) {
      GaussianKernel& k = cur.kernels[i];
      for (int d = 0; d < 3; ++d) {
        k.position[d] -= adam_step(grads.position[i][d], mom.m.position[i][d],
                                   mom.v.position[i][d], lr_pos, config, bc1, bc2);
        k.log_scale[d] -= adam_step(grads.log_scale[i][d], mom.m.log_scale[i][d],
                                    mom.v.log_scale[i][d], config.lr_scale, config, bc1, bc2);
      }
      Vec4 q(k.rotation.w, k.rotation.x, k.rotation.y, k.rotation.z);
      for (int d = 0; d < 4; ++d) {
        q[d] -= adam_step(grads.rotation[i][d], mom.m.rotation[i][d], mom.v.rotation[i][d],
                          config.lr_rotation, config, bc1, bc2);
      }
      k.rotation = Quaternion(q[0], q[1], q[2], q[3]).normalized();
      k.opacity_logit -= adam_step(grads.opacity[i], mom.m.opacity[i], mom.v.opacity[i],
                                   config.lr_opacity, config, bc1, bc2);
      for (size_t j = 0; j < sh_values; ++j) {
        const size_t idx = i * sh_values + j;
        const double lr = j < 3 ? config.lr_sh_dc : config.lr_sh_rest;
        k.sh[j] -= adam_step(grads.sh[idx], mom.m.sh[idx], mom.v.sh[idx], lr, config, bc1, bc2);
      }
    }
  }

  if (report) {
    report->best_energy = best_energy;
    report->best_iteration = best_iteration;
  }
  return best;
}

}  // namespace gs4d
