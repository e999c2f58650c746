#include "gs4d/energy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gs4d {
namespace {

void check_pair(const FrameState& cur, const FrameState& prev) {
  if (cur.size() != prev.size()) {
    throw std::invalid_argument("energy: frame kernel counts differ (" +
                                std::to_string(cur.size()) + " vs " +
                                std::to_string(prev.size()) + ")");
  }
}

void check_weights(const FrameState& cur, const std::vector<double>& w) {
  if (w.size() != cur.size()) {
    throw std::invalid_argument("energy: adaptive weight count does not match kernel count");
  }
}

}  // namespace

std::vector<double> adaptive_weights(const std::vector<Vec3>& warped_prev,
                                     const std::vector<Vec3>& warped_cur, double alpha) {
  if (warped_prev.size() != warped_cur.size()) {
    throw std::invalid_argument("adaptive_weights: position list lengths differ");
  }
  std::vector<double> w(warped_cur.size());
  for (size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(-alpha * (warped_cur[i] - warped_prev[i]).squaredNorm());
  }
  return w;
}

double e_temp(const FrameState& cur, const FrameState& prev, const std::vector<double>& w,
              const EnergyWeights& weights) {
  check_pair(cur, prev);
  check_weights(cur, w);
  double e = 0.0;
  for (size_t i = 0; i < cur.size(); ++i) {
    const GaussianKernel& a = cur.kernels[i];
    const GaussianKernel& b = prev.kernels[i];
    if (a.sh.size() != b.sh.size()) {
      throw std::invalid_argument("e_temp: SH degree differs at kernel " + std::to_string(i));
    }
    double sh2 = 0.0;
    for (size_t j = 0; j < a.sh.size(); ++j) {
      const double d = a.sh[j] - b.sh[j];
      sh2 += d * d;
    }
    const double dop = a.opacity_logit - b.opacity_logit;
    e += w[i] * (weights.lambda_sh * sh2 + weights.lambda_opacity * dop * dop +
                 weights.lambda_scale * (a.log_scale - b.log_scale).squaredNorm());
  }
  return e;
}

double e_temp_grad(const FrameState& cur, const FrameState& prev, const std::vector<double>& w,
                   const EnergyWeights& weights, double scale, KernelGrads& grads) {
  check_pair(cur, prev);
  check_weights(cur, w);
  double e = 0.0;
  for (size_t i = 0; i < cur.size(); ++i) {
    const GaussianKernel& a = cur.kernels[i];
    const GaussianKernel& b = prev.kernels[i];
    if (a.sh.size() != b.sh.size()) {
      throw std::invalid_argument("e_temp: SH degree differs at kernel " + std::to_string(i));
    }
    double sh2 = 0.0;
    double* gsh = grads.sh.data() + i * a.sh.size();
    for (size_t j = 0; j < a.sh.size(); ++j) {
      const double d = a.sh[j] - b.sh[j];
      sh2 += d * d;
      gsh[j] += scale * w[i] * weights.lambda_sh * 2.0 * d;
    }
    const double dop = a.opacity_logit - b.opacity_logit;
    const Vec3 ds = a.log_scale - b.log_scale;
    grads.opacity[i] += scale * w[i] * weights.lambda_opacity * 2.0 * dop;
    grads.log_scale[i] += scale * w[i] * weights.lambda_scale * 2.0 * ds;
    e += w[i] * (weights.lambda_sh * sh2 + weights.lambda_opacity * dop * dop +
                 weights.lambda_scale * ds.squaredNorm());
  }
  return e;
}

double e_smooth(const FrameState& cur, const FrameState& prev, const GaussianGraph& graph,
                const std::vector<double>& w) {
  check_pair(cur, prev);
  check_weights(cur, w);
  if (graph.size() != cur.size()) {
    throw std::invalid_argument("e_smooth: graph was built for a different kernel count");
  }
  double e = 0.0;
  for (size_t i = 0; i < cur.size(); ++i) {
    const Quaternion q_rel =
        cur.kernels[i].rotation.normalized() * prev.kernels[i].rotation.normalized().conjugate();
    const Mat3 r = quat_to_rot(q_rel);
    const Vec3& pi_cur = cur.kernels[i].position;
    const Vec3& pi_prev = prev.kernels[i].position;
    for (int jn : graph.kernel_neighbors[i]) {
      const Vec3 resid = r * (prev.kernels[jn].position - pi_prev) -
                         (cur.kernels[jn].position - pi_cur);
      e += w[i] * resid.squaredNorm();
    }
  }
  return e;
}

double e_smooth_grad(const FrameState& cur, const FrameState& prev, const GaussianGraph& graph,
                     const std::vector<double>& w, double scale, KernelGrads& grads) {
  check_pair(cur, prev);
  check_weights(cur, w);
  if (graph.size() != cur.size()) {
    throw std::invalid_argument("e_smooth: graph was built for a different kernel count");
  }
  double e = 0.0;
  for (size_t i = 0; i < cur.size(); ++i) {
    const Quaternion q_cur = cur.kernels[i].rotation;
    const Quaternion q_hat = q_cur.normalized();
    const Quaternion k = prev.kernels[i].rotation.normalized().conjugate();
    const Quaternion q_rel = q_hat * k;
    const Mat3 r = quat_to_rot(q_rel);
    const Vec3& pi_cur = cur.kernels[i].position;
    const Vec3& pi_prev = prev.kernels[i].position;
    Mat3 gr = Mat3::Zero();
    for (int jn : graph.kernel_neighbors[i]) {
      const Vec3 d_prev = prev.kernels[jn].position - pi_prev;
      const Vec3 resid = r * d_prev - (cur.kernels[jn].position - pi_cur);
      e += w[i] * resid.squaredNorm();
      const Vec3 gres = scale * w[i] * 2.0 * resid;
      // d resid / d p_{j,t} = -I, d resid / d p_{i,t} = +I.
      grads.position[jn] -= gres;
      grads.position[i] += gres;
      gr += gres * d_prev.transpose();
    }
    // Rotation chain: R(normalize(q_hat * k)) with k constant, then the
    // normalization of the raw current quaternion.
    const Vec4 g_rel = quat_rot_backward(q_rel, gr);
    const Vec4 g_hat = quat_right_mul_matrix(k).transpose() * g_rel;
    const double n = std::sqrt(q_cur.w * q_cur.w + q_cur.x * q_cur.x + q_cur.y * q_cur.y +
                               q_cur.z * q_cur.z);
    const Vec4 u(q_hat.w, q_hat.x, q_hat.y, q_hat.z);
    grads.rotation[i] += (g_hat - u * u.dot(g_hat)) / n;
  }
  return e;
}

EnergyBreakdown total_energy(const FrameState& cur, const FrameState& prev,
                             const GaussianGraph& graph, const std::vector<Camera>& cameras,
                             const std::vector<Image>& targets, const std::vector<double>& w,
                             const EnergyWeights& weights, const RasterConfig& raster,
                             KernelGrads* grads) {
  if (cameras.size() != targets.size()) {
    throw std::invalid_argument("total_energy: camera and target counts differ");
  }
  if (grads) {
    grads->resize(cur.size(), cur.kernels.empty() ? 0 : cur.kernels.front().sh.size());
  }
  EnergyBreakdown out;
  if (grads) {
    out.temp = e_temp_grad(cur, prev, w, weights, weights.lambda_temp, *grads);
    out.smooth = e_smooth_grad(cur, prev, graph, w, weights.lambda_smooth, *grads);
  } else {
    out.temp = e_temp(cur, prev, w, weights);
    out.smooth = e_smooth(cur, prev, graph, w);
  }
  for (size_t c = 0; c < cameras.size(); ++c) {
    if (grads) {
      // e_color_grad accumulates the raw MAE gradient; fold lambda_color in
      // by scaling afterwards only once, so run it through a staging buffer.
      KernelGrads stage;
      stage.resize(cur.size(), cur.kernels.front().sh.size());
      out.color += e_color_grad(cur.kernels, cameras[c], targets[c], raster, stage);
      if (weights.lambda_color != 0.0) {
        for (size_t i = 0; i < cur.size(); ++i) {
          grads->position[i] += weights.lambda_color * stage.position[i];
          grads->rotation[i] += weights.lambda_color * stage.rotation[i];
          grads->log_scale[i] += weights.lambda_color * stage.log_scale[i];
          grads->opacity[i] += weights.lambda_color * stage.opacity[i];
        }
        for (size_t i = 0; i < grads->sh.size(); ++i) {
          grads->sh[i] += weights.lambda_color * stage.sh[i];
        }
      }
    } else {
      out.color += e_color(cur.kernels, cameras[c], targets[c], raster);
    }
  }
  out.total = weights.lambda_temp * out.temp + weights.lambda_smooth * out.smooth +
              weights.lambda_color * out.color;
  return out;
}

}  // namespace gs4d
