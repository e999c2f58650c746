#include "gs4d/synth.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

#include "gs4d/sh.hpp"

namespace gs4d {
namespace {

constexpr double kTau = 6.283185307179586476925286766559;

FieldSample eval_forward(const DeformationField& f, const Vec3& p, double t);

// Bend in the x-z plane: points rotate about the line {x=0, z=1/k} by the
// angle k*x, which maps the x-axis onto an arc of curvature k.
FieldSample eval_bend(double k, const Vec3& q) {
  FieldSample s;
  if (k == 0.0) {
    s.position = q;
    s.jacobian = Mat3::Identity();
    return s;
  }
  const double theta = k * q.x();
  const double c = std::cos(theta), sn = std::sin(theta);
  const double r = 1.0 / k - q.z();
  s.position = Vec3(sn * r, q.y(), 1.0 / k - c * r);
  s.jacobian << c * (1.0 - k * q.z()), 0.0, -sn,  //
      0.0, 1.0, 0.0,                              //
      sn * (1.0 - k * q.z()), 0.0, c;
  return s;
}

Vec3 invert_bend(double k, const Vec3& y) {
  if (k == 0.0) return y;
  const double rx = y.x(), rz = 1.0 / k - y.z();
  // The signed distance to the bend axis has the sign of k on the fold-free
  // domain, which also fixes the atan2 quadrant.
  const double theta = std::atan2(k * rx, k * rz);
  const double r = std::sqrt(rx * rx + rz * rz) * (k > 0.0 ? 1.0 : -1.0);
  return Vec3(theta / k, y.y(), 1.0 / k - r);
}

FieldSample eval_twist(double rate_t, const Vec3& q) {
  FieldSample s;
  const double phi = rate_t * q.z();
  const double c = std::cos(phi), sn = std::sin(phi);
  s.position = Vec3(c * q.x() - sn * q.y(), sn * q.x() + c * q.y(), q.z());
  s.jacobian << c, -sn, -rate_t * s.position.y(),  //
      sn, c, rate_t * s.position.x(),              //
      0.0, 0.0, 1.0;
  return s;
}

FieldSample eval_ripple(const DeformationField& f, double t, const Vec3& q) {
  FieldSample s;
  const double w = kTau / f.wavelength;
  const double a0 = w * q.x();
  const double at = a0 + f.phase_rate * t;
  s.position = Vec3(q.x(), q.y(), q.z() + f.amplitude * (std::sin(at) - std::sin(a0)));
  s.jacobian = Mat3::Identity();
  s.jacobian(2, 0) = f.amplitude * w * (std::cos(at) - std::cos(a0));
  return s;
}

FieldSample eval_rigid(const DeformationField& f, double t, const Vec3& q) {
  FieldSample s;
  const Mat3 r = rotation_exp(f.axis.normalized() * (f.rate * t));
  s.position = r * q + f.velocity * t;
  s.jacobian = r;
  return s;
}

FieldSample eval_forward(const DeformationField& f, const Vec3& p, double t) {
  const Vec3 q = p - f.origin;
  FieldSample s;
  switch (f.kind) {
    case FieldKind::kRigid:
      s = eval_rigid(f, t, q);
      break;
    case FieldKind::kBend:
      s = eval_bend(f.curvature * t, q);
      break;
    case FieldKind::kTwist:
      s = eval_twist(f.rate * t, q);
      break;
    case FieldKind::kRipple:
      s = eval_ripple(f, t, q);
      break;
    case FieldKind::kComposite: {
      s.position = p;
      s.jacobian = Mat3::Identity();
      for (const DeformationField& part : f.parts) {
        const FieldSample inner = eval_field(part, s.position, t);
        s.jacobian = inner.jacobian * s.jacobian;
        s.position = inner.position;
      }
      return s;  // parts handle their own origins
    }
  }
  s.position += f.origin;
  return s;
}

// Exact inverse point of the forward map at frame t.
Vec3 invert_point(const DeformationField& f, const Vec3& p, double t) {
  const Vec3 q = p - f.origin;
  Vec3 out;
  switch (f.kind) {
    case FieldKind::kRigid: {
      const Mat3 r = rotation_exp(f.axis.normalized() * (f.rate * t));
      out = r.transpose() * (q - f.velocity * t);
      break;
    }
    case FieldKind::kBend:
      out = invert_bend(f.curvature * t, q);
      break;
    case FieldKind::kTwist: {
      // z is invariant, so the inverse is a twist by the opposite rate.
      out = eval_twist(-f.rate * t, q).position;
      break;
    }
    case FieldKind::kRipple: {
      // x is invariant, so subtract the same offset.
      const double w = kTau / f.wavelength;
      const double a0 = w * q.x();
      out = Vec3(q.x(), q.y(),
                 q.z() - f.amplitude * (std::sin(a0 + f.phase_rate * t) - std::sin(a0)));
      break;
    }
    case FieldKind::kComposite: {
      Vec3 cur = p;
      for (auto it = f.parts.rbegin(); it != f.parts.rend(); ++it) {
        DeformationField part = *it;
        part.invert = !part.invert;
        cur = eval_field(part, cur, t).position;
      }
      return cur;
    }
  }
  return out + f.origin;
}

}  // namespace

FieldSample eval_field(const DeformationField& field, const Vec3& p, double t) {
  if (!field.invert) return eval_forward(field, p, t);
  // Inverse map: position from the closed form, Jacobian as the inverse of
  // the forward Jacobian at the preimage.
  DeformationField fwd = field;
  fwd.invert = false;
  FieldSample s;
  s.position = invert_point(fwd, p, t);
  s.jacobian = eval_forward(fwd, s.position, t).jacobian.inverse();
  return s;
}

Quaternion polar_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 r = u * v.transpose();
  if (r.determinant() < 0.0) {
    u.col(2) *= -1.0;
    r = u * v.transpose();
  }
  return quat_from_rot(r);
}

FrameState apply_field(const FrameState& state, const DeformationField& field, int t) {
  FrameState out = state;
  out.frame_index = t;
  for (GaussianKernel& k : out.kernels) {
    const FieldSample s = eval_field(field, k.position, t);
    k.position = s.position;
    k.rotation = (polar_rotation(s.jacobian) * k.rotation).normalized();
  }
  return out;
}

BaseScene make_base_scene(BaseShape shape, size_t kernel_count, uint64_t seed) {
  if (kernel_count < 100) {
    throw std::invalid_argument("make_base_scene: need at least 100 kernels");
  }
  Rng rng(seed);
  BaseScene scene;
  scene.frame.frame_index = 0;
  scene.frame.kernels.reserve(kernel_count);
  scene.labels.reserve(kernel_count);

  // Surface area drives the tangential footprint so neighboring kernels
  // overlap regardless of count.
  const auto tangent_scale = [&](double area) {
    return std::sqrt(area / static_cast<double>(kernel_count));
  };

  for (size_t i = 0; i < kernel_count; ++i) {
    Vec3 p = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    Region label = Region::kBody;
    double s_t = 0.0;
    switch (shape) {
      case BaseShape::kSphere: {
        const double radius = 0.5;
        Vec3 dir(rng.normal(), rng.normal(), rng.normal());
        while (dir.norm() < 1e-6) dir = Vec3(rng.normal(), rng.normal(), rng.normal());
        normal = dir.normalized();
        p = normal * radius;
        s_t = tangent_scale(2.0 * kTau * radius * radius);
        break;
      }
      case BaseShape::kCylinder: {
        const double radius = 0.3, height = 1.2;
        const double a = rng.uniform(0.0, kTau);
        const double z = rng.uniform(-0.5, 0.5) * height;
        normal = Vec3(std::cos(a), std::sin(a), 0.0);
        p = Vec3(radius * normal.x(), radius * normal.y(), z);
        s_t = tangent_scale(kTau * radius * height);
        break;
      }
      case BaseShape::kTwoLobe: {
        // Large "body" lobe plus a small offset "hand" lobe, area-weighted.
        const double r_body = 0.45, r_hand = 0.22;
        const double area_body = 2.0 * kTau * r_body * r_body;
        const double area_hand = 2.0 * kTau * r_hand * r_hand;
        const bool hand = rng.uniform() < area_hand / (area_body + area_hand);
        const double radius = hand ? r_hand : r_body;
        const Vec3 center = hand ? Vec3(0.62, 0.0, 0.0) : Vec3(-0.15, 0.0, 0.0);
        Vec3 dir(rng.normal(), rng.normal(), rng.normal());
        while (dir.norm() < 1e-6) dir = Vec3(rng.normal(), rng.normal(), rng.normal());
        normal = dir.normalized();
        p = center + normal * radius;
        label = hand ? Region::kHand : Region::kBody;
        s_t = tangent_scale(area_body + area_hand);
        break;
      }
    }

    GaussianKernel k;
    k.position = p;
    // Tangent frame (t1, t2, normal) with a deterministic reference axis.
    const Vec3 ref = std::abs(normal.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
    const Vec3 t1 = normal.cross(ref).normalized();
    const Vec3 t2 = normal.cross(t1);
    Mat3 frame;
    frame.col(0) = t1;
    frame.col(1) = t2;
    frame.col(2) = normal;
    if (frame.determinant() < 0.0) frame.col(1) *= -1.0;
    k.rotation = quat_from_rot(frame);

    const double jitter = rng.uniform(0.8, 1.25);
    const double st = s_t * jitter;
    k.log_scale = Vec3(std::log(st), std::log(st), std::log(st * 0.25));
    k.opacity_logit = 4.0 + rng.uniform(-0.3, 0.3);
    k.sh.assign(sh_value_count(kMaxShDegree), 0.0);
    for (int c = 0; c < 3; ++c) k.sh[c] = rng.uniform(-1.2, 1.2);
    for (size_t j = 3; j < k.sh.size(); ++j) k.sh[j] = rng.normal() * 0.02;

    scene.frame.kernels.push_back(std::move(k));
    scene.labels.push_back(label);
  }
  return scene;
}

SyntheticSequence make_sequence(const BaseScene& base, const DeformationField& field,
                                int frame_count, int camera_count, int image_size,
                                const DriftSpec& drift, const RasterConfig& raster) {
  if (frame_count < 1) throw std::invalid_argument("make_sequence: need at least 1 frame");
  if (camera_count < 1) throw std::invalid_argument("make_sequence: need at least 1 camera");

  SyntheticSequence seq;
  seq.labels = base.labels;
  seq.cameras = camera_ring(camera_count, 2.4, 0.9, Vec3(0, 0, 0), 0.9, image_size, image_size);

  seq.frames.reserve(frame_count);
  seq.targets.resize(frame_count);
  seq.correspondences.resize(frame_count);
  for (int t = 0; t < frame_count; ++t) {
    FrameState frame = apply_field(base.frame, field, t);
    if (drift.opacity_amplitude != 0.0 || drift.sh_amplitude != 0.0) {
      const double phase = kTau * t / drift.period;
      for (GaussianKernel& k : frame.kernels) {
        k.opacity_logit += drift.opacity_amplitude * std::sin(phase);
        for (int c = 0; c < 3; ++c) {
          k.sh[c] += drift.sh_amplitude * std::sin(phase + kTau * c / 3.0);
        }
      }
    }
    seq.correspondences[t].src.resize(frame.size());
    seq.correspondences[t].tgt.resize(frame.size());
    for (size_t i = 0; i < frame.size(); ++i) {
      seq.correspondences[t].src[i] = base.frame.kernels[i].position;
      seq.correspondences[t].tgt[i] = frame.kernels[i].position;
    }
    seq.targets[t].reserve(seq.cameras.size());
    for (const Camera& cam : seq.cameras) {
      seq.targets[t].push_back(rasterize(frame.kernels, cam, raster));
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace gs4d
