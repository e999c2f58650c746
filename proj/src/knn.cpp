#include "gs4d/knn.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace gs4d {

namespace {
constexpr int kLeafSize = 8;

// Worse-first ordering for the bounded result heap: larger distance first,
// larger index first among equal distances.
inline bool heap_less(const KnnIndex::Neighbor& a, const KnnIndex::Neighbor& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.index < b.index;
}
}  // namespace

KnnIndex::KnnIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("KnnIndex: empty point set");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  root_ = build(0, static_cast<int>(points_.size()));
}

int KnnIndex::build(int begin, int end) {
  Node node;
  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.count = end - begin;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);

  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double va = points_[a][axis], vb = points_[b][axis];
                     if (va != vb) return va < vb;
                     return a < b;
                   });
  node.axis = axis;
  node.split = points_[order_[mid]][axis];

  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void KnnIndex::search(int node_id, const Vec3& query, int k,
                      std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[node_id];
  if (node.count > 0) {
    for (int i = node.begin; i < node.begin + node.count; ++i) {
      const int idx = order_[i];
      const Neighbor cand{idx, (points_[idx] - query).squaredNorm()};
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), heap_less);
      } else if (heap_less(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), heap_less);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), heap_less);
      }
    }
    return;
  }

  const double delta = query[node.axis] - node.split;
  const int near = delta < 0.0 ? node.left : node.right;
  const int far = delta < 0.0 ? node.right : node.left;
  search(near, query, k, heap);
  // Descend on equality too: an equidistant point with a smaller index may
  // still displace a heap entry.
  if (static_cast<int>(heap.size()) < k || delta * delta <= heap.front().distance) {
    search(far, query, k, heap);
  }
}

std::vector<KnnIndex::Neighbor> KnnIndex::knn(const Vec3& query, int k) const {
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
  if (static_cast<size_t>(k) > points_.size()) {
    throw std::invalid_argument("knn: k (" + std::to_string(k) + ") exceeds point count (" +
                                std::to_string(points_.size()) + ")");
  }
  std::vector<Neighbor> heap;
  heap.reserve(k);
  search(root_, query, k, heap);
  std::sort(heap.begin(), heap.end(), heap_less);
  for (auto& n : heap) n.distance = std::sqrt(n.distance);
  return heap;
}

}  // namespace gs4d
