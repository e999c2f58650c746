#include "gs4d/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "gs4d/parallel.hpp"
#include "gs4d/sh.hpp"

namespace gs4d {
namespace {

constexpr double kCullSigma = 3.0;  // visibility cull bound; independent of the footprint knob
constexpr size_t kRowBlock = 16;    // rows per scheduling block (fixed => reproducible)

bool kernel_finite(const GaussianKernel& k) {
  if (!k.position.allFinite() || !k.log_scale.allFinite()) return false;
  if (!std::isfinite(k.rotation.w) || !std::isfinite(k.rotation.x) ||
      !std::isfinite(k.rotation.y) || !std::isfinite(k.rotation.z)) {
    return false;
  }
  if (!std::isfinite(k.opacity_logit)) return false;
  for (double v : k.sh) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// M = R(q) * diag(exp(s)); the world covariance is M * M^T.
Mat3 scaled_rotation(const GaussianKernel& k) {
  Mat3 m = quat_to_rot(k.rotation);
  const Vec3 scale = k.log_scale.array().exp();
  m.col(0) *= scale.x();
  m.col(1) *= scale.y();
  m.col(2) *= scale.z();
  return m;
}

Eigen::Matrix<double, 2, 3> perspective_jacobian(const Camera& cam, const Vec3& x_cam) {
  const double iz = 1.0 / x_cam.z();
  const double iz2 = iz * iz;
  Eigen::Matrix<double, 2, 3> j;
  j << cam.fx * iz, 0.0, -cam.fx * x_cam.x() * iz2,  //
      0.0, cam.fy * iz, -cam.fy * x_cam.y() * iz2;
  return j;
}

// One accepted compositing step, kept so the backward pass can replay the
// pixel in reverse. `trans` is the transmittance before the step.
struct Contribution {
  uint32_t frag;
  double alpha;
  double trans;
};

struct Forward {
  std::vector<SplatFragment> frags;  // sorted by (depth, kernel index)
  std::vector<uint32_t> offsets;     // per-pixel CSR into ids, size W*H+1
  std::vector<uint32_t> ids;
  Image image;
  // Replay data per row block, only filled on request.
  std::vector<std::vector<Contribution>> block_contribs;
  std::vector<std::vector<uint32_t>> block_pix_start;  // per block: rows*W+1 prefix
};

std::vector<SplatFragment> project_all(const std::vector<GaussianKernel>& kernels,
                                       const Camera& camera, const RasterConfig& config) {
  camera.validate();
  const size_t n = kernels.size();
  std::vector<SplatFragment> slots(n);
  std::vector<uint8_t> keep(n, 0);
  const size_t grain = 1024;
  std::vector<int64_t> block_bad(block_count(n, grain), -1);
  parallel_for_blocks(n, grain, config.threads, [&](size_t b, size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      if (!kernel_finite(kernels[i])) {
        if (block_bad[b] < 0) block_bad[b] = static_cast<int64_t>(i);
        continue;
      }
      if (auto frag = project(kernels[i], camera, config)) {
        frag->kernel = static_cast<int>(i);
        slots[i] = *frag;
        keep[i] = 1;
      }
    }
  });
  for (int64_t bad : block_bad) {
    if (bad >= 0) {
      throw std::invalid_argument("rasterize: kernel " + std::to_string(bad) +
                                  " has non-finite attributes");
    }
  }
  std::vector<SplatFragment> frags;
  frags.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    if (keep[i]) frags.push_back(slots[i]);
  }
  std::sort(frags.begin(), frags.end(), [](const SplatFragment& a, const SplatFragment& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.kernel < b.kernel;
  });
  return frags;
}

Forward run_forward(const std::vector<GaussianKernel>& kernels, const Camera& camera,
                    const RasterConfig& config, bool keep_contribs) {
  Forward fwd;
  fwd.frags = project_all(kernels, camera, config);
  const int w = camera.width, h = camera.height;
  const size_t pixels = static_cast<size_t>(w) * h;
  fwd.image = Image(w, h);

  // CSR pixel lists, filled in depth order so each list is already sorted.
  fwd.offsets.assign(pixels + 1, 0);
  for (const SplatFragment& f : fwd.frags) {
    for (int y = f.y0; y < f.y1; ++y) {
      uint32_t* row = fwd.offsets.data() + 1 + static_cast<size_t>(y) * w;
      for (int x = f.x0; x < f.x1; ++x) ++row[x];
    }
  }
  for (size_t i = 1; i <= pixels; ++i) fwd.offsets[i] += fwd.offsets[i - 1];
  fwd.ids.resize(fwd.offsets[pixels]);
  std::vector<uint32_t> cursor(fwd.offsets.begin(), fwd.offsets.end() - 1);
  for (uint32_t fi = 0; fi < fwd.frags.size(); ++fi) {
    const SplatFragment& f = fwd.frags[fi];
    for (int y = f.y0; y < f.y1; ++y) {
      uint32_t* cur = cursor.data() + static_cast<size_t>(y) * w;
      for (int x = f.x0; x < f.x1; ++x) fwd.ids[cur[x]++] = fi;
    }
  }

  const size_t blocks = block_count(h, kRowBlock);
  if (keep_contribs) {
    fwd.block_contribs.resize(blocks);
    fwd.block_pix_start.resize(blocks);
  }
  parallel_for_blocks(h, kRowBlock, config.threads, [&](size_t b, size_t r0, size_t r1) {
    std::vector<Contribution>* contribs = keep_contribs ? &fwd.block_contribs[b] : nullptr;
    std::vector<uint32_t>* starts = keep_contribs ? &fwd.block_pix_start[b] : nullptr;
    if (starts) starts->assign((r1 - r0) * w + 1, 0);
    for (size_t y = r0; y < r1; ++y) {
      for (int x = 0; x < w; ++x) {
        const size_t pix = y * w + x;
        const double px = x + 0.5, py = y + 0.5;
        double trans = 1.0;
        Vec3 color = Vec3::Zero();
        for (uint32_t li = fwd.offsets[pix]; li < fwd.offsets[pix + 1]; ++li) {
          const uint32_t fi = fwd.ids[li];
          const SplatFragment& f = fwd.frags[fi];
          const double dx = px - f.mean.x(), dy = py - f.mean.y();
          const double power =
              -0.5 * (f.conic_a * dx * dx + 2.0 * f.conic_b * dx * dy + f.conic_c * dy * dy);
          if (power > 0.0) continue;
          const double alpha = std::min(config.alpha_clamp, f.opacity * std::exp(power));
          if (alpha < config.min_alpha) continue;
          color += (alpha * trans) * f.rgb;
          if (contribs) contribs->push_back({fi, alpha, trans});
          trans *= 1.0 - alpha;
          if (trans < config.stop_transmittance) break;
        }
        fwd.image.at(x, static_cast<int>(y), 0) = color.x();
        fwd.image.at(x, static_cast<int>(y), 1) = color.y();
        fwd.image.at(x, static_cast<int>(y), 2) = color.z();
        if (starts) (*starts)[(y - r0) * w + x + 1] = static_cast<uint32_t>(contribs->size());
      }
    }
  });
  return fwd;
}

// Pushes one fragment's accumulated screen-space gradients back to the kernel
// parameters. g9 = [d_mean(2), d_conic a b c (3), d_rgb(3), d_opacity(1)].
void map_fragment_grads(const SplatFragment& f, const GaussianKernel& k, const Camera& camera,
                        const double* g9, KernelGrads& out, int sh_values) {
  const Vec2 gmean(g9[0], g9[1]);
  Mat2 gk;
  gk << g9[2], 0.5 * g9[3], 0.5 * g9[3], g9[4];
  const Vec3 grgb(g9[5], g9[6], g9[7]);

  out.opacity[f.kernel] += g9[8] * f.opacity * (1.0 - f.opacity);

  // Color: through the SH coefficients and, via the view direction, the mean.
  const int degree = sh_degree_from_value_count(k.sh.size());
  const int nb = sh_coeff_count(degree);
  double basis[16];
  Vec3 bgrad[16];
  sh_basis(degree, f.dir, basis);
  sh_basis_grad(degree, f.dir, bgrad);
  Vec3 gdir = Vec3::Zero();
  double* gsh = out.sh.data() + static_cast<size_t>(f.kernel) * sh_values;
  for (int ch = 0; ch < 3; ++ch) {
    double pre = 0.5;
    for (int j = 0; j < nb; ++j) pre += k.sh[j * 3 + ch] * basis[j];
    if (pre <= 0.0) continue;  // clamped channel
    for (int j = 0; j < nb; ++j) {
      gsh[j * 3 + ch] += grgb[ch] * basis[j];
      gdir += (grgb[ch] * k.sh[j * 3 + ch]) * bgrad[j];
    }
  }
  const Vec3 gpos_dir = (gdir - f.dir * f.dir.dot(gdir)) / f.dir_len;

  // conic = cov^-1.
  Mat2 conic;
  conic << f.conic_a, f.conic_b, f.conic_b, f.conic_c;
  const Mat2 gcov = -(conic * gk * conic);

  // cov = A * sigma_w * A^T + dilation; A = J * R_wc.
  const Mat3& wr = camera.world_to_camera.rotation;
  const Eigen::Matrix<double, 2, 3> j = perspective_jacobian(camera, f.x_cam);
  const Eigen::Matrix<double, 2, 3> a = j * wr;
  const Mat3 m = scaled_rotation(k);
  const Mat3 sigma_w = m * m.transpose();
  const Mat3 gsigma = a.transpose() * gcov * a;
  const Eigen::Matrix<double, 2, 3> ga = 2.0 * gcov * a * sigma_w;
  const Eigen::Matrix<double, 2, 3> gj = ga * wr.transpose();

  // sigma_w = M M^T with M = R * diag(exp(s)).
  const Mat3 gm = 2.0 * gsigma * m;
  const Vec3 scale = k.log_scale.array().exp();
  Mat3 gr = gm;
  gr.col(0) *= scale.x();
  gr.col(1) *= scale.y();
  gr.col(2) *= scale.z();
  const Mat3 rt_gm = quat_to_rot(k.rotation).transpose() * gm;
  out.log_scale[f.kernel] +=
      Vec3(rt_gm(0, 0) * scale.x(), rt_gm(1, 1) * scale.y(), rt_gm(2, 2) * scale.z());
  out.rotation[f.kernel] += quat_rot_backward(k.rotation, gr);

  // Mean and Jacobian entries both depend on the camera-space position.
  const double z = f.x_cam.z(), iz = 1.0 / z, iz2 = iz * iz;
  Vec3 gxc = j.transpose() * gmean;
  gxc.x() += gj(0, 2) * (-camera.fx * iz2);
  gxc.y() += gj(1, 2) * (-camera.fy * iz2);
  gxc.z() += gj(0, 0) * (-camera.fx * iz2) + gj(1, 1) * (-camera.fy * iz2) +
             gj(0, 2) * (2.0 * camera.fx * f.x_cam.x() * iz2 * iz) +
             gj(1, 2) * (2.0 * camera.fy * f.x_cam.y() * iz2 * iz);

  out.position[f.kernel] += wr.transpose() * gxc + gpos_dir;
}

}  // namespace

void KernelGrads::resize(size_t kernels, size_t sh_values) {
  position.assign(kernels, Vec3::Zero());
  rotation.assign(kernels, Vec4::Zero());
  log_scale.assign(kernels, Vec3::Zero());
  opacity.assign(kernels, 0.0);
  sh.assign(kernels * sh_values, 0.0);
}

void KernelGrads::set_zero() {
  std::fill(position.begin(), position.end(), Vec3::Zero());
  std::fill(rotation.begin(), rotation.end(), Vec4::Zero());
  std::fill(log_scale.begin(), log_scale.end(), Vec3::Zero());
  std::fill(opacity.begin(), opacity.end(), 0.0);
  std::fill(sh.begin(), sh.end(), 0.0);
}

void KernelGrads::add(const KernelGrads& other) {
  if (position.size() != other.position.size() || sh.size() != other.sh.size()) {
    throw std::invalid_argument("KernelGrads::add: shape mismatch");
  }
  for (size_t i = 0; i < position.size(); ++i) {
    position[i] += other.position[i];
    rotation[i] += other.rotation[i];
    log_scale[i] += other.log_scale[i];
    opacity[i] += other.opacity[i];
  }
  for (size_t i = 0; i < sh.size(); ++i) sh[i] += other.sh[i];
}

std::optional<SplatFragment> project(const GaussianKernel& kernel, const Camera& camera,
                                     const RasterConfig& config) {
  const Mat3& wr = camera.world_to_camera.rotation;
  const Vec3 x_cam = wr * kernel.position + camera.world_to_camera.translation;
  if (!(x_cam.z() > config.near_plane)) return std::nullopt;

  const Mat3 m = scaled_rotation(kernel);
  const Mat3 sigma_w = m * m.transpose();
  const Eigen::Matrix<double, 2, 3> a = perspective_jacobian(camera, x_cam) * wr;
  Mat2 cov = a * sigma_w * a.transpose();
  cov(0, 0) += config.dilation;
  cov(1, 1) += config.dilation;

  const double iz = 1.0 / x_cam.z();
  const Vec2 mean(camera.fx * x_cam.x() * iz + camera.cx,
                  camera.fy * x_cam.y() * iz + camera.cy);

  const double sx = std::sqrt(cov(0, 0)), sy = std::sqrt(cov(1, 1));
  if (mean.x() + kCullSigma * sx < 0.0 || mean.x() - kCullSigma * sx > camera.width ||
      mean.y() + kCullSigma * sy < 0.0 || mean.y() - kCullSigma * sy > camera.height) {
    return std::nullopt;
  }

  SplatFragment f;
  const double rx = config.footprint_sigma * sx, ry = config.footprint_sigma * sy;
  f.x0 = static_cast<int>(std::clamp(std::floor(mean.x() - rx), 0.0, double(camera.width)));
  f.x1 = static_cast<int>(std::clamp(std::ceil(mean.x() + rx) + 1.0, 0.0, double(camera.width)));
  f.y0 = static_cast<int>(std::clamp(std::floor(mean.y() - ry), 0.0, double(camera.height)));
  f.y1 = static_cast<int>(std::clamp(std::ceil(mean.y() + ry) + 1.0, 0.0, double(camera.height)));
  if (f.x0 >= f.x1 || f.y0 >= f.y1) return std::nullopt;

  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
  f.conic_a = cov(1, 1) / det;
  f.conic_b = -cov(0, 1) / det;
  f.conic_c = cov(0, 0) / det;
  f.mean = mean;
  f.cov = cov;
  f.depth = x_cam.z();
  f.x_cam = x_cam;
  const Vec3 to_kernel = kernel.position - camera.center();
  f.dir_len = to_kernel.norm();
  f.dir = to_kernel / f.dir_len;
  f.rgb = sh_eval(kernel.sh, f.dir);
  f.opacity = sigmoid(kernel.opacity_logit);
  return f;
}

Image rasterize(const std::vector<GaussianKernel>& kernels, const Camera& camera,
                const RasterConfig& config) {
  return run_forward(kernels, camera, config, /*keep_contribs=*/false).image;
}

double e_color(const std::vector<GaussianKernel>& kernels, const Camera& camera,
               const Image& target, const RasterConfig& config) {
  if (target.width != camera.width || target.height != camera.height) {
    throw std::invalid_argument("e_color: target image size does not match the camera");
  }
  const Image render = rasterize(kernels, camera, config);
  double sum = 0.0;
  for (size_t i = 0; i < render.data.size(); ++i) sum += std::abs(render.data[i] - target.data[i]);
  return sum / static_cast<double>(render.data.size());
}

double e_color_grad(const std::vector<GaussianKernel>& kernels, const Camera& camera,
                    const Image& target, const RasterConfig& config, KernelGrads& grads,
                    Image* rendered) {
  if (target.width != camera.width || target.height != camera.height) {
    throw std::invalid_argument("e_color_grad: target image size does not match the camera");
  }
  if (kernels.empty()) throw std::invalid_argument("e_color_grad: no kernels");
  const int sh_values = static_cast<int>(kernels.front().sh.size());
  if (grads.position.size() != kernels.size() ||
      grads.sh.size() != kernels.size() * static_cast<size_t>(sh_values)) {
    throw std::invalid_argument("e_color_grad: grads not sized for this frame");
  }

  const Forward fwd = run_forward(kernels, camera, config, /*keep_contribs=*/true);
  const int w = camera.width, h = camera.height;
  double loss_sum = 0.0;
  for (size_t i = 0; i < fwd.image.data.size(); ++i) {
    loss_sum += std::abs(fwd.image.data[i] - target.data[i]);
  }
  const double loss = loss_sum / static_cast<double>(fwd.image.data.size());
  const double dpix = 1.0 / static_cast<double>(fwd.image.data.size());

  // Screen-space gradients, accumulated per row block and reduced in block
  // order so the result is independent of the thread count.
  const size_t nfrags = fwd.frags.size();
  const size_t blocks = block_count(h, kRowBlock);
  std::vector<std::vector<double>> block_acc(blocks);
  parallel_for_blocks(h, kRowBlock, config.threads, [&](size_t b, size_t r0, size_t r1) {
    std::vector<double>& acc = block_acc[b];
    acc.assign(nfrags * 9, 0.0);
    const std::vector<Contribution>& contribs = fwd.block_contribs[b];
    const std::vector<uint32_t>& starts = fwd.block_pix_start[b];
    for (size_t y = r0; y < r1; ++y) {
      for (int x = 0; x < w; ++x) {
        const size_t local = (y - r0) * w + x;
        const uint32_t c0 = starts[local], c1 = starts[local + 1];
        if (c0 == c1) continue;
        Vec3 dc;
        for (int ch = 0; ch < 3; ++ch) {
          const double diff = fwd.image.at(x, static_cast<int>(y), ch) -
                              target.at(x, static_cast<int>(y), ch);
          dc[ch] = diff > 0.0 ? dpix : (diff < 0.0 ? -dpix : 0.0);
        }
        const double px = x + 0.5, py = y + 0.5;
        Vec3 suffix = Vec3::Zero();  // sum of c_j * alpha_j * T_j over later steps
        for (uint32_t ci = c1; ci-- > c0;) {
          const Contribution& c = contribs[ci];
          const SplatFragment& f = fwd.frags[c.frag];
          double* g = acc.data() + static_cast<size_t>(c.frag) * 9;
          g[5] += c.alpha * c.trans * dc.x();
          g[6] += c.alpha * c.trans * dc.y();
          g[7] += c.alpha * c.trans * dc.z();
          const double dalpha = c.trans * f.rgb.dot(dc) - suffix.dot(dc) / (1.0 - c.alpha);
          if (c.alpha < config.alpha_clamp) {
            const double dx = px - f.mean.x(), dy = py - f.mean.y();
            const double power = -0.5 * (f.conic_a * dx * dx + 2.0 * f.conic_b * dx * dy +
                                         f.conic_c * dy * dy);
            const double gauss = std::exp(power);
            g[8] += dalpha * gauss;
            const double dpower = dalpha * f.opacity * gauss;
            g[0] += dpower * (f.conic_a * dx + f.conic_b * dy);
            g[1] += dpower * (f.conic_b * dx + f.conic_c * dy);
            g[2] += dpower * (-0.5 * dx * dx);
            g[3] += dpower * (-dx * dy);
            g[4] += dpower * (-0.5 * dy * dy);
          }
          suffix += (c.alpha * c.trans) * f.rgb;
        }
      }
    }
  });

  std::vector<double> total(nfrags * 9, 0.0);
  for (size_t b = 0; b < blocks; ++b) {
    const std::vector<double>& acc = block_acc[b];
    for (size_t i = 0; i < total.size(); ++i) total[i] += acc[i];
  }

  // Each kernel appears in at most one fragment, so parallel writes are disjoint.
  parallel_for_blocks(nfrags, 256, config.threads, [&](size_t, size_t begin, size_t end) {
    for (size_t fi = begin; fi < end; ++fi) {
      const SplatFragment& f = fwd.frags[fi];
      map_fragment_grads(f, kernels[f.kernel], camera, total.data() + fi * 9, grads, sh_values);
    }
  });

  if (rendered) *rendered = fwd.image;
  return loss;
}

}  // namespace gs4d
