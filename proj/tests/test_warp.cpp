#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "gs4d/gaussian_graph.hpp"
#include "gs4d/rng.hpp"
#include "gs4d/synth.hpp"

using namespace gs4d;

namespace {

std::vector<Vec3> random_cloud(Rng& rng, int n, double extent = 1.0) {
  std::vector<Vec3> pts(n);
  for (auto& p : pts)
    p = Vec3(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
             rng.uniform(-extent, extent));
  return pts;
}

// A frame whose kernels sit at the given positions with random attributes.
FrameState frame_at(const std::vector<Vec3>& positions, Rng& rng) {
  FrameState frame;
  frame.kernels.resize(positions.size());
  for (size_t i = 0; i < positions.size(); ++i) {
    auto& k = frame.kernels[i];
    k.position = positions[i];
    k.rotation =
        Quaternion(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized();
    k.log_scale = Vec3(rng.uniform(-3, -2), rng.uniform(-3, -2), rng.uniform(-3, -2));
    k.opacity_logit = rng.uniform(-1, 1);
    k.sh.assign(3, 0.1);
  }
  return frame;
}

// Apply one rigid transform to every node of the graph.
void set_rigid_motion(EDGraph& graph, const RigidTransform& t) {
  const DualQuaternion dq = dq_from_rigid(t);
  for (auto& node : graph.nodes) node.dq = dq;
}

RigidTransform random_rigid(Rng& rng) {
  RigidTransform t;
  t.rotation = quat_to_rot(
      Quaternion(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized());
  t.translation = Vec3(rng.normal(), rng.normal(), rng.normal());
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("warp");

TEST_CASE("sample_ed_nodes covers the cloud and builds a symmetric 4-NN graph") {
  Rng rng(61);
  const auto points = random_cloud(rng, 800);
  const double spacing = 0.4;
  const EDGraph graph = sample_ed_nodes(points, spacing);
  CHECK(graph.node_radius == spacing);
  CHECK(graph.size() >= 8);
  CHECK(graph.size() < points.size());

  // Every point has a node within one cell diagonal (nodes are cell centroids).
  const double max_dist = spacing * std::sqrt(3.0);
  for (const Vec3& p : points) {
    double best = 1e30;
    for (const auto& node : graph.nodes) best = std::min(best, (node.x - p).norm());
    CHECK(best <= max_dist);
  }

  REQUIRE(graph.edges.size() == graph.size());
  for (size_t i = 0; i < graph.size(); ++i) {
    for (int j : graph.edges[i]) {
      REQUIRE(j >= 0);
      REQUIRE(j < static_cast<int>(graph.size()));
      CHECK(j != static_cast<int>(i));
      const auto& back = graph.edges[j];
      CHECK(std::find(back.begin(), back.end(), static_cast<int>(i)) != back.end());
    }
  }

  // All motion starts at identity.
  for (const auto& node : graph.nodes) {
    CHECK((node.dq.real - Quaternion::identity()).norm() < 1e-15);
    CHECK(node.dq.dual.norm() < 1e-15);
  }
}

TEST_CASE("sample_ed_nodes is deterministic") {
  Rng rng(62);
  const auto points = random_cloud(rng, 500);
  const EDGraph a = sample_ed_nodes(points, 0.3);
  const EDGraph b = sample_ed_nodes(points, 0.3);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a.nodes[i].x == b.nodes[i].x);
    CHECK(a.edges[i] == b.edges[i]);
  }
}

TEST_CASE("bind_point weights are a normalized RBF over the 8 nearest nodes") {
  Rng rng(63);
  const auto points = random_cloud(rng, 600);
  const EDGraph graph = sample_ed_nodes(points, 0.35);
  std::vector<Vec3> node_pos(graph.size());
  for (size_t i = 0; i < graph.size(); ++i) node_pos[i] = graph.nodes[i].x;
  const KnnIndex index(node_pos);

  for (int it = 0; it < 50; ++it) {
    const Vec3 p = random_cloud(rng, 1)[0];
    const Binding b = bind_point(p, graph, index);
    double sum = 0;
    std::set<int> seen;
    for (int j = 0; j < kBindingNodes; ++j) {
      CHECK(b.weights[j] >= 0.0);
      sum += b.weights[j];
      seen.insert(b.node_indices[j]);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(seen.size() == kBindingNodes);

    // Oracle: unnormalized weights proportional to the Gaussian RBF.
    const auto nn = index.knn(p, kBindingNodes);
    double expect_sum = 0;
    for (const auto& n : nn) expect_sum += influence_weight(node_pos[n.index], p, graph.node_radius);
    for (int j = 0; j < kBindingNodes; ++j) {
      const double expect =
          influence_weight(node_pos[b.node_indices[j]], p, graph.node_radius) / expect_sum;
      CHECK(b.weights[j] == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("dqb with identical node transforms reproduces the transform") {
  Rng rng(64);
  const auto points = random_cloud(rng, 400);
  EDGraph graph = sample_ed_nodes(points, 0.35);
  const RigidTransform t = random_rigid(rng);
  set_rigid_motion(graph, t);
  std::vector<Vec3> node_pos(graph.size());
  for (size_t i = 0; i < graph.size(); ++i) node_pos[i] = graph.nodes[i].x;
  const KnnIndex index(node_pos);

  for (int it = 0; it < 20; ++it) {
    const Binding b = bind_point(random_cloud(rng, 1)[0], graph, index);
    const RigidTransform blended = dq_to_rigid(dqb(b, graph));
    CHECK((blended.rotation - t.rotation).norm() < 1e-10);
    CHECK((blended.translation - t.translation).norm() < 1e-10);
  }
}

TEST_CASE("dqb is insensitive to per-node quaternion sign flips") {
  Rng rng(65);
  const auto points = random_cloud(rng, 400);
  EDGraph graph = sample_ed_nodes(points, 0.35);
  const RigidTransform t = random_rigid(rng);
  set_rigid_motion(graph, t);
  EDGraph flipped = graph;
  for (size_t i = 0; i < flipped.size(); i += 2) {
    flipped.nodes[i].dq.real = -flipped.nodes[i].dq.real;
    flipped.nodes[i].dq.dual = -flipped.nodes[i].dq.dual;
  }
  std::vector<Vec3> node_pos(graph.size());
  for (size_t i = 0; i < graph.size(); ++i) node_pos[i] = graph.nodes[i].x;
  const KnnIndex index(node_pos);
  for (int it = 0; it < 20; ++it) {
    const Vec3 p = random_cloud(rng, 1)[0];
    const Binding b = bind_point(p, graph, index);
    const RigidTransform a = dq_to_rigid(dqb(b, graph));
    const RigidTransform c = dq_to_rigid(dqb(b, flipped));
    CHECK((a.apply(p) - c.apply(p)).norm() < 1e-10);
  }
}

TEST_CASE("warp_kernel is equivariant under a global rigid motion") {
  Rng rng(66);
  const auto points = random_cloud(rng, 1000);
  const FrameState key = frame_at(points, rng);
  EDGraph graph = sample_ed_nodes(points, 0.35);
  const GaussianGraph fine = build_gaussian_graph(key, graph);

  for (int trial = 0; trial < 10; ++trial) {
    const RigidTransform t = random_rigid(rng);
    set_rigid_motion(graph, t);
    const Quaternion rot = quat_from_rot(t.rotation);
    for (size_t i = 0; i < key.size(); ++i) {
      const WarpedPose pose = warp_kernel(key.kernels[i], fine.bindings[i], graph);
      CHECK((pose.position - t.apply(key.kernels[i].position)).norm() < 1e-5);
      const Quaternion expect = rot * key.kernels[i].rotation;
      CHECK(std::abs(std::abs(pose.rotation.dot(expect)) - 1.0) < 1e-5);
    }
  }
}

TEST_CASE("warp approximates a bend field within the coarse-graph bound") {
  Rng rng(67);
  const BaseScene base = make_base_scene(BaseShape::kSphere, 1500, 77);
  const double spacing = 0.15;
  std::vector<Vec3> positions(base.frame.size());
  for (size_t i = 0; i < positions.size(); ++i) positions[i] = base.frame.kernels[i].position;
  EDGraph graph = sample_ed_nodes(positions, spacing);
  const GaussianGraph fine = build_gaussian_graph(base.frame, graph);

  DeformationField field;
  field.kind = FieldKind::kBend;
  field.curvature = 0.3;

  // Drive each node by the exact field (what perfect tracking would find).
  const double t = 1.0;
  for (auto& node : graph.nodes) {
    const FieldSample s = eval_field(field, node.x, t);
    RigidTransform local;
    local.rotation = quat_to_rot(polar_rotation(s.jacobian));
    local.translation = s.position - local.rotation * node.x;
    node.dq = dq_from_rigid(local);
  }

  const double bound = 2.0 * spacing * field.curvature;
  double worst = 0.0;
  for (size_t i = 0; i < base.frame.size(); ++i) {
    const WarpedPose pose = warp_kernel(base.frame.kernels[i], fine.bindings[i], graph);
    const Vec3 expect = eval_field(field, base.frame.kernels[i].position, t).position;
    worst = std::max(worst, (pose.position - expect).norm());
  }
  CHECK(worst < bound);
}

TEST_CASE("warp_frame keeps appearance untouched and stamps the frame index") {
  Rng rng(68);
  const auto points = random_cloud(rng, 300);
  const FrameState key = frame_at(points, rng);
  EDGraph graph = sample_ed_nodes(points, 0.4);
  const GaussianGraph fine = build_gaussian_graph(key, graph);
  set_rigid_motion(graph, random_rigid(rng));

  const FrameState warped = warp_frame(key, fine, graph, 7);
  CHECK(warped.frame_index == 7);
  REQUIRE(warped.size() == key.size());
  for (size_t i = 0; i < key.size(); ++i) {
    CHECK(warped.kernels[i].log_scale == key.kernels[i].log_scale);
    CHECK(warped.kernels[i].opacity_logit == key.kernels[i].opacity_logit);
    CHECK(warped.kernels[i].sh == key.kernels[i].sh);
  }
}

TEST_CASE("build_gaussian_graph neighbor lists match brute force") {
  Rng rng(69);
  const auto points = random_cloud(rng, 120);
  const FrameState key = frame_at(points, rng);
  const EDGraph graph = sample_ed_nodes(points, 0.5);
  const GaussianGraph fine = build_gaussian_graph(key, graph);
  REQUIRE(fine.size() == key.size());

  for (size_t i = 0; i < points.size(); ++i) {
    // Oracle: sort all other kernels by (distance, index).
    std::vector<std::pair<double, int>> order;
    for (size_t j = 0; j < points.size(); ++j) {
      if (j == i) continue;
      order.push_back({(points[j] - points[i]).norm(), static_cast<int>(j)});
    }
    std::sort(order.begin(), order.end());
    for (int j = 0; j < kKernelNeighbors; ++j) {
      CHECK(fine.kernel_neighbors[i][j] == order[j].second);
    }
  }
}

TEST_CASE("build_gaussian_graph rejects undersized inputs") {
  Rng rng(70);
  const auto points = random_cloud(rng, 10);
  const FrameState key = frame_at(points, rng);
  EDGraph graph;
  graph.node_radius = 0.3;
  graph.nodes.resize(4);
  CHECK_THROWS_AS(build_gaussian_graph(key, graph), std::invalid_argument);
}

TEST_SUITE_END();
