#include "doctest.h"

#include <cmath>

#include "gs4d/rng.hpp"
#include "gs4d/synth.hpp"
#include "gs4d/tracking.hpp"

using namespace gs4d;

namespace {

RigidTransform random_rigid(Rng& rng, double angle_scale = 1.0) {
  RigidTransform t;
  const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  t.rotation = rotation_exp(axis * rng.uniform(-angle_scale, angle_scale));
  t.translation = Vec3(rng.normal(), rng.normal(), rng.normal()) * 0.3;
  return t;
}

std::vector<Vec3> scene_points(int count, uint64_t seed) {
  const BaseScene base = make_base_scene(BaseShape::kSphere, count, seed);
  std::vector<Vec3> pts(base.frame.size());
  for (size_t i = 0; i < pts.size(); ++i) pts[i] = base.frame.kernels[i].position;
  return pts;
}

CorrespondenceSet rigid_pairs(const std::vector<Vec3>& pts, const RigidTransform& t) {
  CorrespondenceSet corr;
  corr.src = pts;
  corr.tgt.reserve(pts.size());
  for (const Vec3& p : pts) corr.tgt.push_back(t.apply(p));
  return corr;
}

double bbox_diagonal(const std::vector<Vec3>& pts) {
  Vec3 lo = pts.front(), hi = pts.front();
  for (const Vec3& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

}  // namespace

TEST_SUITE_BEGIN("tracking");

TEST_CASE("plan_segments covers every frame exactly once") {
  const SegmentPlan plan = plan_segments(30, 12);
  CHECK(plan.keyframes == std::vector<int>{0, 12, 24});
  const auto segs = plan.segments();
  REQUIRE(segs.size() == 3);
  CHECK(segs[0] == std::make_pair(0, 12));
  CHECK(segs[1] == std::make_pair(12, 24));
  CHECK(segs[2] == std::make_pair(24, 30));

  const SegmentPlan exact = plan_segments(24, 12);
  CHECK(exact.segments().back() == std::make_pair(12, 24));

  const SegmentPlan single = plan_segments(5, 30);
  CHECK(single.keyframes == std::vector<int>{0});
  CHECK(single.segments().front() == std::make_pair(0, 5));

  CHECK_THROWS_AS(plan_segments(0, 10), std::invalid_argument);
  CHECK_THROWS_AS(plan_segments(10, 0), std::invalid_argument);
}

TEST_CASE("e_reg vanishes under global rigid motion and grows otherwise") {
  Rng rng(81);
  const auto pts = scene_points(800, 5);
  EDGraph graph = sample_ed_nodes(pts, 0.15);

  CHECK(e_reg(graph) == 0.0);  // identity motion

  const DualQuaternion rigid = dq_from_rigid(random_rigid(rng));
  for (auto& node : graph.nodes) node.dq = rigid;
  CHECK(e_reg(graph) < 1e-18);

  // Perturb one node: the regularizer must see it.
  graph.nodes[0].dq = dq_from_rigid(random_rigid(rng));
  CHECK(e_reg(graph) > 1e-6);
}

TEST_CASE("e_data is the mean squared point distance after warping") {
  const auto pts = scene_points(400, 6);
  EDGraph graph = sample_ed_nodes(pts, 0.15);
  CorrespondenceSet corr;
  corr.src = pts;
  corr.tgt = pts;
  // Identity motion on identical pairs: zero.
  CHECK(e_data(graph, corr) == doctest::Approx(0.0).epsilon(1e-15));

  // Uniform target offset of d along x with identity motion: every residual
  // has squared norm d^2.
  const double d = 0.05;
  for (auto& p : corr.tgt) p.x() += d;
  const double per_point = e_data(graph, corr) / static_cast<double>(pts.size());
  CHECK(per_point == doctest::Approx(d * d).epsilon(1e-12));
}

TEST_CASE("solve_tracking recovers a global rigid transform") {
  Rng rng(82);
  const auto pts = scene_points(1200, 7);
  const EDGraph graph = sample_ed_nodes(pts, 0.15);
  for (int trial = 0; trial < 3; ++trial) {
    const RigidTransform t = random_rigid(rng, 0.6);
    const CorrespondenceSet corr = rigid_pairs(pts, t);
    TrackConfig cfg;
    const EDGraph solved = solve_tracking(graph, corr, cfg);

    // The solved per-node transforms must act on points like the ground truth.
    double worst = 0.0;
    for (const auto& node : solved.nodes) {
      const RigidTransform local = dq_to_rigid(node.dq.normalized());
      worst = std::max(worst, (local.apply(node.x) - t.apply(node.x)).norm());
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("solve_tracking fits a bend field below 1% of the bbox diagonal") {
  const auto pts = scene_points(2000, 8);
  const EDGraph graph = sample_ed_nodes(pts, 0.15);

  DeformationField field;
  field.kind = FieldKind::kBend;
  field.curvature = 0.02;

  CorrespondenceSet corr;
  corr.src = pts;
  corr.tgt.reserve(pts.size());
  for (const Vec3& p : pts) corr.tgt.push_back(eval_field(field, p, 29.0).position);

  TrackConfig cfg;
  const EDGraph solved = solve_tracking(graph, corr, cfg);

  const double rms = std::sqrt(e_data(solved, corr) / static_cast<double>(pts.size()));
  CHECK(rms < 0.01 * bbox_diagonal(pts));
}

TEST_CASE("solve_tracking never increases the energy") {
  const auto pts = scene_points(600, 9);
  const EDGraph graph = sample_ed_nodes(pts, 0.18);
  DeformationField field;
  field.kind = FieldKind::kTwist;
  field.rate = 0.03;
  CorrespondenceSet corr;
  corr.src = pts;
  for (const Vec3& p : pts) corr.tgt.push_back(eval_field(field, p, 20.0).position);

  TrackConfig cfg;
  cfg.max_iterations = 1;  // even a single step must not regress
  const EDGraph one = solve_tracking(graph, corr, cfg);
  const double initial =
      cfg.lambda_data * e_data(graph, corr) + cfg.lambda_reg * e_reg(graph);
  const double after =
      cfg.lambda_data * e_data(one, corr) + cfg.lambda_reg * e_reg(one);
  CHECK(after <= initial + 1e-12);
}

TEST_CASE("icp mode aligns an unpaired rigidly moved cloud") {
  Rng rng(83);
  const auto pts = scene_points(900, 10);
  const EDGraph graph = sample_ed_nodes(pts, 0.15);
  // Small motion keeps nearest-neighbor pairing mostly correct from the start.
  RigidTransform t;
  t.rotation = rotation_exp(Vec3(0, 0, 1) * 0.05);
  t.translation = Vec3(0.02, -0.015, 0.01);

  CorrespondenceSet corr = rigid_pairs(pts, t);
  // Shuffle targets: ICP mode must not rely on the pairing.
  Rng shuffle_rng(84);
  shuffle_rng.shuffle(corr.tgt);

  TrackConfig cfg;
  cfg.mode = CorrespondenceMode::kNearestNeighborIcp;
  const EDGraph solved = solve_tracking(graph, corr, cfg);
  double worst = 0.0;
  for (const auto& node : solved.nodes) {
    const RigidTransform local = dq_to_rigid(node.dq.normalized());
    worst = std::max(worst, (local.apply(node.x) - t.apply(node.x)).norm());
  }
  CHECK(worst < 5e-3);
}

TEST_CASE("point-to-plane data term uses normal projections") {
  const auto pts = scene_points(300, 11);
  EDGraph graph = sample_ed_nodes(pts, 0.2);
  CorrespondenceSet corr;
  corr.src = pts;
  corr.tgt = pts;
  corr.normals.assign(pts.size(), Vec3(0, 0, 1));
  // Offset targets along x: point-to-plane residual against z-normals is zero.
  for (auto& p : corr.tgt) p.x() += 0.3;
  CHECK(e_data(graph, corr) == doctest::Approx(0.0).epsilon(1e-15));
  // Offset along the normal: full residual.
  for (auto& p : corr.tgt) p.z() += 0.1;
  const double per_point = e_data(graph, corr) / static_cast<double>(pts.size());
  CHECK(per_point == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("invalid correspondence sets are rejected") {
  const auto pts = scene_points(200, 12);
  const EDGraph graph = sample_ed_nodes(pts, 0.2);
  CorrespondenceSet corr;
  CHECK_THROWS_AS(e_data(graph, corr), std::invalid_argument);
  corr.src = pts;
  corr.tgt.assign(3, Vec3::Zero());
  CHECK_THROWS_AS(e_data(graph, corr), std::invalid_argument);
  TrackConfig cfg;
  CHECK_THROWS_AS(solve_tracking(graph, corr, cfg), std::invalid_argument);
}

TEST_SUITE_END();
