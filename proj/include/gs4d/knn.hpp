#pragma once

#include <vector>

#include "gs4d/types.hpp"

namespace gs4d {

// Exact k-nearest-neighbor index over 3D points (kd-tree, median split).
// Results are sorted by ascending distance with ties broken by ascending point
// index, so queries are bit-reproducible. Read-only after construction and safe
// for concurrent queries.
class KnnIndex {
 public:
  struct Neighbor {
    int index;
    double distance;
  };

  explicit KnnIndex(std::vector<Vec3> points);

  size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  // Exact k nearest under Euclidean distance. Throws if k < 1 or k > size().
  std::vector<Neighbor> knn(const Vec3& query, int k) const;

 private:
  struct Node {
    // Leaf when count > 0; internal otherwise.
    int begin = 0, count = 0;
    int axis = 0;
    double split = 0.0;
    int left = -1, right = -1;
  };

  int build(int begin, int end);
  void search(int node, const Vec3& query, int k, std::vector<Neighbor>& heap) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;  // permutation of point indices, grouped by leaf
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace gs4d
