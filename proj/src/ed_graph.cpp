#include "gs4d/ed_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <tuple>

#include "gs4d/knn.hpp"

namespace gs4d {

EDGraph sample_ed_nodes(const std::vector<Vec3>& points, double spacing) {
  if (points.empty()) throw std::invalid_argument("sample_ed_nodes: empty point set");
  if (!(spacing > 0.0)) throw std::invalid_argument("sample_ed_nodes: spacing must be > 0");

  // Ordered map keeps node order independent of insertion order.
  using Cell = std::tuple<int64_t, int64_t, int64_t>;
  std::map<Cell, std::pair<Vec3, int>> cells;
  for (const Vec3& p : points) {
    const Cell c{static_cast<int64_t>(std::floor(p.x() / spacing)),
                 static_cast<int64_t>(std::floor(p.y() / spacing)),
                 static_cast<int64_t>(std::floor(p.z() / spacing))};
    auto [it, inserted] = cells.try_emplace(c, Vec3::Zero(), 0);
    it->second.first += p;
    it->second.second += 1;
  }

  EDGraph graph;
  graph.node_radius = spacing;
  graph.nodes.reserve(cells.size());
  for (const auto& [cell, acc] : cells) {
    EDNode node;
    node.x = acc.first / acc.second;
    graph.nodes.push_back(node);
  }

  const size_t n = graph.nodes.size();
  graph.edges.assign(n, {});
  if (n > 1) {
    std::vector<Vec3> positions(n);
    for (size_t i = 0; i < n; ++i) positions[i] = graph.nodes[i].x;
    KnnIndex index(positions);
    const int k = static_cast<int>(std::min<size_t>(4, n - 1));
    for (size_t i = 0; i < n; ++i) {
      const auto nbrs = index.knn(graph.nodes[i].x, k + 1);
      for (const auto& nb : nbrs) {
        if (nb.index == static_cast<int>(i)) continue;
        graph.edges[i].push_back(nb.index);
        if (static_cast<int>(graph.edges[i].size()) == k) break;
      }
    }
    // Symmetrize.
    for (size_t i = 0; i < n; ++i) {
      for (int j : graph.edges[i]) {
        auto& back = graph.edges[j];
        if (std::find(back.begin(), back.end(), static_cast<int>(i)) == back.end()) {
          back.push_back(static_cast<int>(i));
        }
      }
    }
    for (auto& e : graph.edges) std::sort(e.begin(), e.end());
  }
  return graph;
}

}  // namespace gs4d
