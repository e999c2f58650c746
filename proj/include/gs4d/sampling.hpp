#pragma once

#include <vector>

#include "gs4d/rng.hpp"
#include "gs4d/types.hpp"

namespace gs4d {

// Body-part label of an input point. The sampler budgets seeds 8:1:1 across
// these regions.
enum class Region : int { kBody = 0, kHand = 1, kFace = 2 };

// Picks `total` seed indices (sorted, without replacement) from labeled
// points, targeting an 8:1:1 body/hand/face split. Quotas for empty regions
// are redistributed proportionally, as is the surplus of any region smaller
// than its quota.
std::vector<size_t> importance_sample_kernels(const std::vector<Region>& labels, size_t total,
                                              Rng& rng);

}  // namespace gs4d
