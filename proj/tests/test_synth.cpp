#include "gs4d/synth.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "gs4d/quaternion.hpp"
#include "gs4d/rng.hpp"
#include "gs4d/types.hpp"

using namespace gs4d;

TEST_SUITE_BEGIN("synth");

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

DeformationField rigid_field() {
  DeformationField f;
  f.kind = FieldKind::kRigid;
  f.axis = Vec3(0.3, -1.0, 0.5);
  f.origin = Vec3(0.1, -0.2, 0.05);
  f.rate = 0.07;
  f.velocity = Vec3(0.01, -0.02, 0.004);
  return f;
}

DeformationField bend_field() {
  DeformationField f;
  f.kind = FieldKind::kBend;
  f.curvature = 0.04;
  f.origin = Vec3(0.02, 0.0, -0.1);
  return f;
}

DeformationField twist_field() {
  DeformationField f;
  f.kind = FieldKind::kTwist;
  f.rate = 0.05;
  f.origin = Vec3(0.0, 0.1, 0.0);
  return f;
}

DeformationField ripple_field() {
  DeformationField f;
  f.kind = FieldKind::kRipple;
  f.amplitude = 0.06;
  f.wavelength = 0.8;
  f.phase_rate = 0.3;
  f.origin = Vec3(-0.05, 0.0, 0.0);
  return f;
}

DeformationField composite_field() {
  DeformationField f;
  f.kind = FieldKind::kComposite;
  f.parts = {bend_field(), twist_field(), ripple_field()};
  return f;
}

std::vector<DeformationField> all_fields() {
  return {rigid_field(), bend_field(), twist_field(), ripple_field(), composite_field()};
}

// Central-difference Jacobian, the independent oracle for the analytic one.
Mat3 fd_jacobian(const DeformationField& f, const Vec3& p, double t, double h) {
  Mat3 j;
  for (int d = 0; d < 3; ++d) {
    Vec3 lo = p, hi = p;
    lo[d] -= h;
    hi[d] += h;
    j.col(d) = (eval_field(f, hi, t).position - eval_field(f, lo, t).position) / (2.0 * h);
  }
  return j;
}

Vec3 random_point(Rng& rng) {
  return Vec3(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4));
}

}  // namespace

TEST_CASE("every field kind is the identity at frame zero") {
  Rng rng(5);
  for (const DeformationField& f : all_fields()) {
    for (int i = 0; i < 20; ++i) {
      const Vec3 p = random_point(rng);
      const FieldSample s = eval_field(f, p, 0.0);
      CHECK((s.position - p).norm() < 1e-15);
      CHECK((s.jacobian - Mat3::Identity()).norm() < 1e-15);
    }
  }
}

TEST_CASE("analytic Jacobians match central finite differences") {
  Rng rng(7);
  for (const DeformationField& f : all_fields()) {
    for (int i = 0; i < 25; ++i) {
      const Vec3 p = random_point(rng);
      const double t = rng.uniform(0.5, 25.0);
      const Mat3 fd = fd_jacobian(f, p, t, 1e-5);
      CHECK((eval_field(f, p, t).jacobian - fd).cwiseAbs().maxCoeff() < 5e-6);
    }
  }
}

TEST_CASE("the invert flag gives the exact two-sided inverse") {
  Rng rng(11);
  for (DeformationField f : all_fields()) {
    DeformationField g = f;
    g.invert = true;
    for (int i = 0; i < 25; ++i) {
      const Vec3 p = random_point(rng);
      const double t = rng.uniform(0.5, 20.0);
      const FieldSample fwd = eval_field(f, p, t);
      CHECK((eval_field(g, fwd.position, t).position - p).norm() < 1e-12);
      const FieldSample bwd = eval_field(g, p, t);
      CHECK((eval_field(f, bwd.position, t).position - p).norm() < 1e-12);
      // Chain rule: the inverse Jacobian at the image point undoes the
      // forward Jacobian at the source point.
      const Mat3 prod = eval_field(g, fwd.position, t).jacobian * fwd.jacobian;
      CHECK((prod - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("the rigid field is an isometry matching its axis-angle oracle") {
  const DeformationField f = rigid_field();
  Rng rng(13);
  const double t = 9.0;
  const Mat3 r_oracle =
      quat_to_rot(Quaternion::from_axis_angle(f.axis.normalized(), f.rate * t));
  for (int i = 0; i < 20; ++i) {
    const Vec3 p = random_point(rng);
    const Vec3 q = random_point(rng);
    const FieldSample sp = eval_field(f, p, t);
    const FieldSample sq = eval_field(f, q, t);
    CHECK((sp.position - sq.position).norm() == doctest::Approx((p - q).norm()).epsilon(1e-12));
    CHECK((sp.jacobian - r_oracle).cwiseAbs().maxCoeff() < 1e-12);
    const Vec3 expect = r_oracle * (p - f.origin) + f.velocity * t + f.origin;
    CHECK((sp.position - expect).norm() < 1e-14);
  }
}

TEST_CASE("twist rotates each slice about the axis by exactly rate*t*z") {
  const DeformationField f = twist_field();
  Rng rng(17);
  for (int i = 0; i < 20; ++i) {
    const Vec3 p = random_point(rng);
    const double t = rng.uniform(1.0, 30.0);
    const FieldSample s = eval_field(f, p, t);
    const Vec3 local = p - f.origin;
    const double phi = f.rate * t * local.z();
    const Vec3 expect =
        f.origin + Vec3(std::cos(phi) * local.x() - std::sin(phi) * local.y(),
                        std::sin(phi) * local.x() + std::cos(phi) * local.y(), local.z());
    CHECK((s.position - expect).norm() < 1e-14);
    CHECK(s.position.z() == p.z());                       // axis coordinate invariant
    CHECK(s.jacobian.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("bend wraps the x-axis onto a circle of the prescribed curvature") {
  DeformationField f = bend_field();
  f.origin = Vec3::Zero();
  const double t = 12.0;
  const double k = f.curvature * t;
  const Vec3 center(0.0, 0.0, 1.0 / k);
  Rng rng(19);
  for (int i = 0; i < 20; ++i) {
    const double x = rng.uniform(-0.5, 0.5);
    const Vec3 p(x, rng.uniform(-0.3, 0.3), 0.0);
    const FieldSample s = eval_field(f, p, t);
    // Points on the z=0 plane keep their distance 1/k to the bend axis, and
    // their arc coordinate equals the original x (the map preserves length
    // along the axis).
    const Vec3 radial(s.position.x(), 0.0, s.position.z() - center.z());
    CHECK(radial.norm() == doctest::Approx(1.0 / k).epsilon(1e-12));
    CHECK(std::atan2(radial.x(), -radial.z()) == doctest::Approx(k * x).epsilon(1e-12));
    CHECK(s.position.y() == p.y());  // bend plane is x-z
  }
  // Zero curvature degenerates to the identity, exactly.
  f.curvature = 0.0;
  const Vec3 p(0.3, -0.2, 0.1);
  CHECK(eval_field(f, p, 5.0).position == p);
}

TEST_CASE("ripple displaces only z and vanishes at the key") {
  const DeformationField f = ripple_field();
  Rng rng(23);
  for (int i = 0; i < 20; ++i) {
    const Vec3 p = random_point(rng);
    const double t = rng.uniform(1.0, 40.0);
    const FieldSample s = eval_field(f, p, t);
    // x and y are invariant up to the origin shift's rounding.
    CHECK(std::abs(s.position.x() - p.x()) < 1e-15);
    CHECK(std::abs(s.position.y() - p.y()) < 1e-15);
    const double w = kTau / f.wavelength;
    const double a0 = w * (p.x() - f.origin.x());
    const double expect = f.amplitude * (std::sin(a0 + f.phase_rate * t) - std::sin(a0));
    CHECK(s.position.z() - p.z() == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(s.position.z() - p.z()) <= 2.0 * f.amplitude + 1e-15);
  }
}

TEST_CASE("polar_rotation recovers the rotation factor") {
  Rng rng(29);
  SUBCASE("identity maps to the identity quaternion") {
    const Quaternion q = polar_rotation(Mat3::Identity());
    CHECK(q.w == 1.0);
    CHECK(q.x == 0.0);
    CHECK(q.y == 0.0);
    CHECK(q.z == 0.0);
  }

  SUBCASE("pure rotations pass through") {
    for (int i = 0; i < 30; ++i) {
      const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
      const Mat3 r = rotation_exp(axis.normalized() * rng.uniform(-3.0, 3.0));
      CHECK((quat_to_rot(polar_rotation(r)) - r).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SUBCASE("a symmetric positive stretch is factored out") {
    for (int i = 0; i < 30; ++i) {
      const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
      const Mat3 r = rotation_exp(axis.normalized() * rng.uniform(-3.0, 3.0));
      // S = B * diag(positive) * B^T is symmetric positive definite.
      const Vec3 axis2(rng.normal(), rng.normal(), rng.normal());
      const Mat3 b = rotation_exp(axis2.normalized() * rng.uniform(-3.0, 3.0));
      const Vec3 eig(rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0));
      const Mat3 s = b * eig.asDiagonal() * b.transpose();
      CHECK((quat_to_rot(polar_rotation(r * s)) - r).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  SUBCASE("the result is always a proper rotation") {
    for (int i = 0; i < 30; ++i) {
      Mat3 m;
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) m(a, b) = rng.normal();
      }
      const Mat3 r = quat_to_rot(polar_rotation(m));
      CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("apply_field moves poses and leaves appearance untouched") {
  BaseScene base = make_base_scene(BaseShape::kSphere, 150, 3);
  const DeformationField f = composite_field();
  const int t = 14;
  const FrameState out = apply_field(base.frame, f, t);
  REQUIRE(out.size() == base.frame.size());
  CHECK(out.frame_index == t);

  for (size_t i = 0; i < out.size(); ++i) {
    const GaussianKernel& in = base.frame.kernels[i];
    const GaussianKernel& ker = out.kernels[i];
    const FieldSample s = eval_field(f, in.position, t);
    CHECK((ker.position - s.position).norm() == 0.0);
    // Rotation composes with the field's local polar rotation.
    const Quaternion expect = (polar_rotation(s.jacobian) * in.rotation).normalized();
    const double diff = std::min((expect - ker.rotation).norm(), (expect + ker.rotation).norm());
    CHECK(diff < 1e-14);
    CHECK(ker.log_scale == in.log_scale);
    CHECK(ker.opacity_logit == in.opacity_logit);
    CHECK(ker.sh == in.sh);
  }
}

TEST_CASE("make_base_scene is deterministic and shape-faithful") {
  const BaseScene a = make_base_scene(BaseShape::kSphere, 200, 42);
  const BaseScene b = make_base_scene(BaseShape::kSphere, 200, 42);
  REQUIRE(a.frame.size() == 200);
  REQUIRE(a.labels.size() == 200);
  for (size_t i = 0; i < 200; ++i) {
    CHECK(a.frame.kernels[i].position == b.frame.kernels[i].position);
    CHECK(a.frame.kernels[i].sh == b.frame.kernels[i].sh);
    CHECK(a.labels[i] == b.labels[i]);
  }
  const BaseScene c = make_base_scene(BaseShape::kSphere, 200, 43);
  bool differs = false;
  for (size_t i = 0; i < 200 && !differs; ++i) {
    differs = a.frame.kernels[i].position != c.frame.kernels[i].position;
  }
  CHECK(differs);

  for (size_t i = 0; i < 200; ++i) {
    const GaussianKernel& k = a.frame.kernels[i];
    CHECK(k.position.norm() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(k.rotation.norm() == doctest::Approx(1.0).epsilon(1e-12));
    // The tangent frame's third column is the outward surface normal, and the
    // kernel is a flat disc: equal tangent scales, thin normal scale.
    const Vec3 normal = k.position.normalized();
    CHECK((quat_to_rot(k.rotation).col(2) - normal).norm() < 1e-9);
    CHECK(k.log_scale[0] == k.log_scale[1]);
    CHECK(std::exp(k.log_scale[2] - k.log_scale[0]) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(k.opacity_logit >= 3.7);
    CHECK(k.opacity_logit <= 4.3);
    REQUIRE(k.sh.size() == sh_value_count(3));
    for (int c2 = 0; c2 < 3; ++c2) CHECK(std::abs(k.sh[c2]) <= 1.2);
    for (size_t j = 3; j < k.sh.size(); ++j) CHECK(std::abs(k.sh[j]) < 0.15);
    CHECK(a.labels[i] == Region::kBody);
  }

  CHECK_THROWS_WITH_AS(make_base_scene(BaseShape::kSphere, 99, 1),
                       doctest::Contains("at least 100"), std::invalid_argument);
}

TEST_CASE("the two-lobe shape labels its lobes by surface membership") {
  const BaseScene scene = make_base_scene(BaseShape::kTwoLobe, 400, 8);
  std::set<Region> seen;
  for (size_t i = 0; i < scene.frame.size(); ++i) {
    const Region label = scene.labels[i];
    seen.insert(label);
    const Vec3 center = label == Region::kHand ? Vec3(0.62, 0.0, 0.0) : Vec3(-0.15, 0.0, 0.0);
    const double radius = label == Region::kHand ? 0.22 : 0.45;
    CHECK((scene.frame.kernels[i].position - center).norm() ==
          doctest::Approx(radius).epsilon(1e-12));
  }
  CHECK(seen.size() == 2);  // both lobes populated
}

TEST_CASE("cylinder kernels live on the curved surface") {
  const BaseScene scene = make_base_scene(BaseShape::kCylinder, 150, 9);
  for (const GaussianKernel& k : scene.frame.kernels) {
    CHECK(std::hypot(k.position.x(), k.position.y()) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(std::abs(k.position.z()) <= 0.6 + 1e-12);
  }
}

TEST_CASE("make_sequence produces exact ground truth and is deterministic") {
  const BaseScene base = make_base_scene(BaseShape::kSphere, 120, 6);
  DeformationField field = bend_field();
  DriftSpec drift;
  drift.opacity_amplitude = 0.2;
  drift.sh_amplitude = 0.15;
  drift.period = 12.0;
  RasterConfig raster;

  const SyntheticSequence seq = make_sequence(base, field, 5, 2, 24, drift, raster);
  REQUIRE(seq.frames.size() == 5);
  REQUIRE(seq.cameras.size() == 2);
  REQUIRE(seq.targets.size() == 5);
  REQUIRE(seq.correspondences.size() == 5);
  CHECK(seq.labels == base.labels);

  SUBCASE("frame zero is the base scene") {
    for (size_t i = 0; i < base.frame.size(); ++i) {
      CHECK((seq.frames[0].kernels[i].position - base.frame.kernels[i].position).norm() < 1e-15);
      CHECK((seq.frames[0].kernels[i].rotation - base.frame.kernels[i].rotation).norm() < 1e-14);
    }
  }

  SUBCASE("correspondences pair base positions with deformed ones, exactly") {
    for (int t = 0; t < 5; ++t) {
      REQUIRE(seq.correspondences[t].src.size() == base.frame.size());
      for (size_t i = 0; i < base.frame.size(); ++i) {
        CHECK(seq.correspondences[t].src[i] == base.frame.kernels[i].position);
        CHECK(seq.correspondences[t].tgt[i] == seq.frames[t].kernels[i].position);
        const Vec3 oracle = eval_field(field, base.frame.kernels[i].position, t).position;
        CHECK((seq.correspondences[t].tgt[i] - oracle).norm() == 0.0);
      }
    }
  }

  SUBCASE("drift follows the sinusoid") {
    for (int t = 0; t < 5; ++t) {
      const double phase = kTau * t / drift.period;
      for (size_t i = 0; i < base.frame.size(); ++i) {
        const double dop =
            seq.frames[t].kernels[i].opacity_logit - base.frame.kernels[i].opacity_logit;
        CHECK(dop == doctest::Approx(drift.opacity_amplitude * std::sin(phase)).epsilon(1e-12));
        for (int c = 0; c < 3; ++c) {
          const double dsh = seq.frames[t].kernels[i].sh[c] - base.frame.kernels[i].sh[c];
          CHECK(dsh == doctest::Approx(drift.sh_amplitude * std::sin(phase + kTau * c / 3.0))
                           .epsilon(1e-12));
        }
        // Bands above the DC stay untouched.
        for (size_t j = 3; j < base.frame.kernels[i].sh.size(); ++j) {
          CHECK(seq.frames[t].kernels[i].sh[j] == base.frame.kernels[i].sh[j]);
        }
      }
    }
  }

  SUBCASE("targets are rendered per frame and camera at the requested size") {
    for (int t = 0; t < 5; ++t) {
      REQUIRE(seq.targets[t].size() == 2);
      for (const Image& img : seq.targets[t]) {
        CHECK(img.width == 24);
        CHECK(img.height == 24);
        double peak = 0.0;
        for (double v : img.data) {
          CHECK(std::isfinite(v));
          peak = std::max(peak, v);
        }
        CHECK(peak > 0.0);  // the subject is in view
      }
    }
  }

  SUBCASE("identical inputs reproduce the sequence bit for bit") {
    const SyntheticSequence again = make_sequence(base, field, 5, 2, 24, drift, raster);
    for (int t = 0; t < 5; ++t) {
      for (size_t i = 0; i < base.frame.size(); ++i) {
        CHECK(again.frames[t].kernels[i].position == seq.frames[t].kernels[i].position);
        CHECK(again.frames[t].kernels[i].sh == seq.frames[t].kernels[i].sh);
      }
      for (size_t c = 0; c < 2; ++c) CHECK(again.targets[t][c].data == seq.targets[t][c].data);
    }
  }

  SUBCASE("degenerate requests are rejected") {
    CHECK_THROWS_WITH_AS(make_sequence(base, field, 0, 2, 24, drift, raster),
                         doctest::Contains("at least 1 frame"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(make_sequence(base, field, 5, 0, 24, drift, raster),
                         doctest::Contains("at least 1 camera"), std::invalid_argument);
  }
}

TEST_CASE("a zero field keeps every frame at the key pose") {
  const BaseScene base = make_base_scene(BaseShape::kCylinder, 110, 12);
  DeformationField still;  // rigid with zero rate and velocity
  const SyntheticSequence seq = make_sequence(base, still, 4, 1, 16, DriftSpec{}, RasterConfig{});
  for (int t = 1; t < 4; ++t) {
    for (size_t i = 0; i < base.frame.size(); ++i) {
      CHECK(seq.frames[t].kernels[i].position == seq.frames[0].kernels[i].position);
      CHECK(seq.frames[t].kernels[i].opacity_logit == seq.frames[0].kernels[i].opacity_logit);
    }
  }
}

TEST_SUITE_END();
