#include "gs4d/gaussian_graph.hpp"

#include <stdexcept>
#include <string>

namespace gs4d {

DualQuaternion dqb(const Binding& binding, const EDGraph& graph) {
  DualQuaternion blend{{0, 0, 0, 0}, {0, 0, 0, 0}};
  const DualQuaternion& anchor = graph.nodes[binding.node_indices[0]].dq;
  for (int i = 0; i < kBindingNodes; ++i) {
    const double w = binding.weights[i];
    DualQuaternion dq = graph.nodes[binding.node_indices[i]].dq;
    if (dq.real.dot(anchor.real) < 0.0) dq = dq * -1.0;
    blend = blend + dq * w;
  }
  if (blend.real.norm() < 1e-8) {
    throw std::runtime_error("dqb: antipodal blend collapsed the real part");
  }
  return blend.normalized();
}

Binding bind_point(const Vec3& p, const EDGraph& graph, const KnnIndex& node_index) {
  const auto nbrs = node_index.knn(p, kBindingNodes);
  Binding b;
  double total = 0.0;
  for (int i = 0; i < kBindingNodes; ++i) {
    b.node_indices[i] = nbrs[i].index;
    b.weights[i] = influence_weight(graph.nodes[nbrs[i].index].x, p, graph.node_radius);
    total += b.weights[i];
  }
  if (total < 1e-300) {
    // All neighbors far beyond the node radius; fall back to uniform weights.
    for (auto& w : b.weights) w = 1.0 / kBindingNodes;
  } else {
    for (auto& w : b.weights) w /= total;
  }
  return b;
}

WarpedPose warp_kernel(const GaussianKernel& kernel, const Binding& binding,
                       const EDGraph& graph) {
  const DualQuaternion blend = dqb(binding, graph);
  const RigidTransform t = dq_to_rigid(blend);
  WarpedPose out;
  out.position = t.apply(kernel.position);
  // Deliberately not renormalized: an identity blend must reproduce the input
  // rotation bit for bit, which the residual coder relies on for static
  // segments. |rotation| stays within rounding of the input's norm.
  out.rotation = rot_of(blend) * kernel.rotation;
  return out;
}

FrameState warp_frame(const FrameState& key, const GaussianGraph& graph, const EDGraph& ed,
                      int t) {
  if (graph.size() != key.size()) {
    throw std::invalid_argument("warp_frame: graph was built for a different kernel count");
  }
  FrameState out = key;
  out.frame_index = t;
  for (size_t i = 0; i < key.size(); ++i) {
    const WarpedPose pose = warp_kernel(key.kernels[i], graph.bindings[i], ed);
    out.kernels[i].position = pose.position;
    out.kernels[i].rotation = pose.rotation;
  }
  return out;
}

GaussianGraph build_gaussian_graph(const FrameState& keyframe, const EDGraph& ed) {
  const size_t n = keyframe.size();
  if (n < kKernelNeighbors + 1) {
    throw std::invalid_argument("build_gaussian_graph: need at least 17 kernels, got " +
                                std::to_string(n));
  }
  if (ed.size() < kBindingNodes) {
    throw std::invalid_argument("build_gaussian_graph: need at least 8 ED nodes, got " +
                                std::to_string(ed.size()));
  }

  std::vector<Vec3> positions(n);
  for (size_t i = 0; i < n; ++i) positions[i] = keyframe.kernels[i].position;
  KnnIndex kernel_index(positions);

  std::vector<Vec3> node_positions(ed.size());
  for (size_t i = 0; i < ed.size(); ++i) node_positions[i] = ed.nodes[i].x;
  KnnIndex node_index(node_positions);

  GaussianGraph graph;
  graph.kernel_neighbors.resize(n);
  graph.bindings.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const auto nbrs = kernel_index.knn(positions[i], kKernelNeighbors + 1);
    int filled = 0;
    for (const auto& nb : nbrs) {
      if (nb.index == static_cast<int>(i)) continue;
      graph.kernel_neighbors[i][filled++] = nb.index;
      if (filled == kKernelNeighbors) break;
    }
    if (filled != kKernelNeighbors) {
      throw std::runtime_error("build_gaussian_graph: neighbor fill failure");
    }
    graph.bindings[i] = bind_point(positions[i], ed, node_index);
  }
  return graph;
}

}  // namespace gs4d
