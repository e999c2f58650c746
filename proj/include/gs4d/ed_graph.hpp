#pragma once

#include <vector>

#include "gs4d/quaternion.hpp"
#include "gs4d/types.hpp"

namespace gs4d {

// One coarse deformation node: key-space position plus current motion estimate.
struct EDNode {
  Vec3 x = Vec3::Zero();
  DualQuaternion dq = DualQuaternion::identity();
};

// Coarse embedded-deformation graph. Edges are symmetric and feed only the
// tracking regularizer.
struct EDGraph {
  std::vector<EDNode> nodes;
  double node_radius = 0.0;
  std::vector<std::vector<int>> edges;

  size_t size() const { return nodes.size(); }

  void reset_motion() {
    for (auto& n : nodes) n.dq = DualQuaternion::identity();
  }
};

// Unnormalized Gaussian RBF influence of a node at v; callers normalize over
// the 8-neighbor binding.
inline double influence_weight(const Vec3& node_x, const Vec3& v, double radius) {
  const double d2 = (node_x - v).squaredNorm();
  return std::exp(-d2 / (2.0 * radius * radius));
}

// Voxel-grid downsample: one node per occupied cell of size `spacing`, placed
// at the cell centroid. Edges are the symmetrized 4-NN over nodes; node_radius
// equals the spacing. All motion starts at identity.
EDGraph sample_ed_nodes(const std::vector<Vec3>& points, double spacing);

}  // namespace gs4d
