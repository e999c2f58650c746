#include "doctest.h"

#include <algorithm>
#include <set>

#include "gs4d/rng.hpp"
#include "gs4d/sampling.hpp"

using namespace gs4d;

namespace {

std::vector<Region> make_labels(size_t body, size_t hand, size_t face) {
  std::vector<Region> labels;
  labels.insert(labels.end(), body, Region::kBody);
  labels.insert(labels.end(), hand, Region::kHand);
  labels.insert(labels.end(), face, Region::kFace);
  return labels;
}

size_t count_region(const std::vector<Region>& labels, const std::vector<size_t>& chosen,
                    Region region) {
  size_t n = 0;
  for (size_t idx : chosen)
    if (labels[idx] == region) ++n;
  return n;
}

}  // namespace

TEST_SUITE_BEGIN("sampling");

TEST_CASE("selection is sorted, unique, and in range") {
  Rng rng(121);
  const auto labels = make_labels(500, 80, 60);
  const auto chosen = importance_sample_kernels(labels, 100, rng);
  REQUIRE(chosen.size() == 100);
  CHECK(std::is_sorted(chosen.begin(), chosen.end()));
  CHECK(std::set<size_t>(chosen.begin(), chosen.end()).size() == chosen.size());
  for (size_t idx : chosen) CHECK(idx < labels.size());
}

TEST_CASE("quotas follow the 8:1:1 split when every region has enough points") {
  Rng rng(122);
  const auto labels = make_labels(800, 100, 100);
  const auto chosen = importance_sample_kernels(labels, 200, rng);
  CHECK(count_region(labels, chosen, Region::kBody) == 160);
  CHECK(count_region(labels, chosen, Region::kHand) == 20);
  CHECK(count_region(labels, chosen, Region::kFace) == 20);
}

TEST_CASE("fractional quotas are settled by largest remainder") {
  Rng rng(123);
  const auto labels = make_labels(400, 200, 200);
  // 25 seeds: ideal 20 / 2.5 / 2.5 -> 20 / 3 / 2 or 20 / 2 / 3; largest
  // remainder with the stable region order resolves the tie to hand first.
  const auto chosen = importance_sample_kernels(labels, 25, rng);
  CHECK(count_region(labels, chosen, Region::kBody) == 20);
  CHECK(count_region(labels, chosen, Region::kHand) == 3);
  CHECK(count_region(labels, chosen, Region::kFace) == 2);
}

TEST_CASE("a short region yields its whole population and the rest is re-split") {
  Rng rng(124);
  // Hand has only 4 points but its 8:1:1 quota would be 20.
  const auto labels = make_labels(1000, 4, 400);
  const auto chosen = importance_sample_kernels(labels, 200, rng);
  CHECK(count_region(labels, chosen, Region::kHand) == 4);
  // Remaining 196 split 8:1 between body and face.
  const size_t body = count_region(labels, chosen, Region::kBody);
  const size_t face = count_region(labels, chosen, Region::kFace);
  CHECK(body + face == 196);
  CHECK(body == doctest::Approx(196.0 * 8.0 / 9.0).epsilon(0.01));
}

TEST_CASE("single-region input takes everything from that region") {
  Rng rng(125);
  const auto labels = make_labels(0, 0, 300);
  const auto chosen = importance_sample_kernels(labels, 50, rng);
  REQUIRE(chosen.size() == 50);
  CHECK(count_region(labels, chosen, Region::kFace) == 50);
}

TEST_CASE("sampling is deterministic in the generator state") {
  const auto labels = make_labels(600, 90, 90);
  Rng a(126), b(126);
  CHECK(importance_sample_kernels(labels, 120, a) == importance_sample_kernels(labels, 120, b));
  Rng c(127);
  CHECK(importance_sample_kernels(labels, 120, c) !=
        importance_sample_kernels(labels, 120, a));
}

TEST_CASE("invalid requests are rejected") {
  Rng rng(128);
  const auto labels = make_labels(50, 5, 5);
  CHECK_THROWS_AS(importance_sample_kernels(labels, 9, rng), std::invalid_argument);
  CHECK_THROWS_WITH_AS(importance_sample_kernels(labels, 61, rng),
                       doctest::Contains("61"), std::invalid_argument);
  auto bad = labels;
  bad[10] = static_cast<Region>(9);
  CHECK_THROWS_AS(importance_sample_kernels(bad, 20, rng), std::invalid_argument);
}

TEST_SUITE_END();
