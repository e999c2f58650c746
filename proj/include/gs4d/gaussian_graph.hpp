#pragma once

#include <array>
#include <vector>

#include "gs4d/ed_graph.hpp"
#include "gs4d/kernel.hpp"
#include "gs4d/knn.hpp"
#include "gs4d/quaternion.hpp"

namespace gs4d {

inline constexpr int kKernelNeighbors = 16;
inline constexpr int kBindingNodes = 8;

// Attachment of one point to its nearest ED nodes. Weights are non-negative
// and sum to 1.
struct Binding {
  std::array<int, kBindingNodes> node_indices{};
  std::array<double, kBindingNodes> weights{};
};

// Fine-grained graph built once per segment at the keyframe and frozen:
// kernel-to-kernel neighborhoods for the smooth term, kernel-to-ED bindings
// for motion interpolation.
struct GaussianGraph {
  std::vector<std::array<int, kKernelNeighbors>> kernel_neighbors;
  std::vector<Binding> bindings;

  size_t size() const { return bindings.size(); }
};

// Dual-quaternion blend over a binding: sign-align each node dq to the first,
// take the weighted sum, normalize. Throws on antipodal degeneracy (blended
// real part below 1e-8).
DualQuaternion dqb(const Binding& binding, const EDGraph& graph);

// Binding of an arbitrary key-space point against the ED nodes: 8 nearest
// nodes, Gaussian RBF weights with sigma = node_radius, normalized.
Binding bind_point(const Vec3& p, const EDGraph& graph, const KnnIndex& node_index);

struct WarpedPose {
  Vec3 position;
  Quaternion rotation;
};

// Keyframe-to-frame warp of one kernel: position through the blended rigid
// transform, rotation composed with its rotation part. Scale, opacity and SH
// pass through untouched.
WarpedPose warp_kernel(const GaussianKernel& kernel, const Binding& binding, const EDGraph& graph);

// Warp every kernel of the keyframe state; frame_index of the result is `t`.
FrameState warp_frame(const FrameState& key, const GaussianGraph& graph, const EDGraph& ed, int t);

// Build the fine graph at the keyframe: exact 16-NN over kernels (self
// excluded) and 8-node bindings over the ED graph.
GaussianGraph build_gaussian_graph(const FrameState& keyframe, const EDGraph& ed);

}  // namespace gs4d
