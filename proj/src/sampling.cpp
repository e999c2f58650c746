#include "gs4d/sampling.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>

namespace gs4d {
namespace {

constexpr std::array<double, 3> kRegionRatio = {8.0, 1.0, 1.0};

// Integer quotas with the given weights summing exactly to `total`
// (largest-remainder rounding; ties broken by region order).
std::array<size_t, 3> apportion(const std::array<double, 3>& weights, size_t total) {
  double wsum = weights[0] + weights[1] + weights[2];
  std::array<size_t, 3> quota{};
  std::array<double, 3> frac{};
  size_t assigned = 0;
  for (int r = 0; r < 3; ++r) {
    const double share = wsum > 0.0 ? total * weights[r] / wsum : 0.0;
    quota[r] = static_cast<size_t>(share);
    frac[r] = share - static_cast<double>(quota[r]);
    assigned += quota[r];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (int i = 0; assigned < total; ++i) {
    ++quota[order[i % 3]];
    ++assigned;
  }
  return quota;
}

}  // namespace

std::vector<size_t> importance_sample_kernels(const std::vector<Region>& labels, size_t total,
                                              Rng& rng) {
  if (total < 10) throw std::invalid_argument("importance_sample_kernels: total must be >= 10");
  if (total > labels.size()) {
    throw std::invalid_argument("importance_sample_kernels: requested " + std::to_string(total) +
                                " seeds from " + std::to_string(labels.size()) + " points");
  }

  std::array<std::vector<size_t>, 3> pools;
  for (size_t i = 0; i < labels.size(); ++i) {
    const int r = static_cast<int>(labels[i]);
    if (r < 0 || r > 2) {
      throw std::invalid_argument("importance_sample_kernels: unknown region label at point " +
                                  std::to_string(i));
    }
    pools[r].push_back(i);
  }

  // Budget across regions; a region exhausted by its quota hands the surplus
  // back, and the rest is re-apportioned among the remaining regions.
  std::array<size_t, 3> take{};
  std::array<bool, 3> open{};
  for (int r = 0; r < 3; ++r) open[r] = !pools[r].empty();
  size_t remaining = total;
  while (remaining > 0) {
    std::array<double, 3> weights{};
    for (int r = 0; r < 3; ++r) {
      if (open[r]) weights[r] = kRegionRatio[r];
    }
    const std::array<size_t, 3> quota = apportion(weights, remaining);
    bool clipped = false;
    for (int r = 0; r < 3; ++r) {
      if (!open[r]) continue;
      const size_t avail = pools[r].size() - take[r];
      if (quota[r] >= avail) {
        take[r] += avail;
        remaining -= avail;
        open[r] = false;
        if (quota[r] > avail) clipped = true;
      }
    }
    if (!clipped) {
      for (int r = 0; r < 3; ++r) {
        if (open[r]) {
          take[r] += quota[r];
          remaining -= quota[r];
        }
      }
      break;
    }
  }

  std::vector<size_t> seeds;
  seeds.reserve(total);
  for (int r = 0; r < 3; ++r) {
    std::vector<size_t>& pool = pools[r];
    rng.shuffle(pool);
    // Re-sort the chosen prefix so output order is stable by point index.
    std::sort(pool.begin(), pool.begin() + take[r]);
    seeds.insert(seeds.end(), pool.begin(), pool.begin() + take[r]);
  }
  std::sort(seeds.begin(), seeds.end());
  return seeds;
}

}  // namespace gs4d
