#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "pdpfi/resampling.hpp"

using namespace pdpfi;

namespace {

bool disjoint(const ResampleSplit& split) {
  std::set<std::size_t> train(split.train.begin(), split.train.end());
  for (std::size_t idx : split.test)
    if (train.count(idx)) return false;
  return true;
}

}  // namespace

TEST_CASE("bootstrap plan basics") {
  const ResamplePlan plan = bootstrap_plan(1000, 200, 7);
  REQUIRE(plan.m() == 200);

  SECTION("train draws have size n, expected unique fraction 0.632") {
    double unique_fraction = 0.0;
    for (const ResampleSplit& split : plan.splits) {
      REQUIRE(split.train.size() == 1000);
      std::set<std::size_t> uniq(split.train.begin(), split.train.end());
      unique_fraction += static_cast<double>(uniq.size()) / 1000.0;
      CHECK(split.test.size() == 1000 - uniq.size());
    }
    unique_fraction /= 200.0;
    CHECK(unique_fraction == Catch::Approx(0.632).margin(0.02));
  }
  SECTION("out-of-bag test sets are disjoint from training") {
    for (const ResampleSplit& split : plan.splits) CHECK(disjoint(split));
  }
  SECTION("deterministic") {
    const ResamplePlan again = bootstrap_plan(1000, 200, 7);
    for (std::size_t d = 0; d < plan.m(); ++d) {
      CHECK(plan.splits[d].train == again.splits[d].train);
      CHECK(plan.splits[d].test == again.splits[d].test);
    }
  }
  SECTION("split d depends only on (seed, d)") {
    const ResamplePlan shorter = bootstrap_plan(1000, 50, 7);
    for (std::size_t d = 0; d < 50; ++d)
      CHECK(plan.splits[d].train == shorter.splits[d].train);
  }
}

TEST_CASE("subsample plan basics") {
  const ResamplePlan plan = subsample_plan(100, 40, 0.632, 11);
  for (const ResampleSplit& split : plan.splits) {
    CHECK(split.train.size() == 63);
    CHECK(split.test.size() == 37);
    CHECK(disjoint(split));
    std::set<std::size_t> all(split.train.begin(), split.train.end());
    all.insert(split.test.begin(), split.test.end());
    CHECK(all.size() == 100);  // union is the full index range
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 99);
  }
}

TEST_CASE("subsample per-index training frequency matches the draw rate") {
  // Binomial oracle: each index lands in a 63-of-100 subsample with
  // probability 0.63; over M independent splits the observed frequency is
  // Binomial(M, 0.63)/M, so 4.5 sigma brackets every index comfortably.
  const std::size_t M = 2000;
  const ResamplePlan plan = subsample_plan(100, M, 0.632, 3);
  std::vector<std::size_t> counts(100, 0);
  for (const ResampleSplit& split : plan.splits)
    for (std::size_t idx : split.train) ++counts[idx];
  const double p = 0.63;
  const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(M));
  for (std::size_t i = 0; i < 100; ++i) {
    const double freq = static_cast<double>(counts[i]) / M;
    CHECK(freq == Catch::Approx(p).margin(4.5 * sigma));
  }
}

TEST_CASE("disjointness holds across modes and seeds") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    for (const ResampleSplit& split : bootstrap_plan(37, 8, seed).splits)
      CHECK(disjoint(split));
    for (const ResampleSplit& split :
         subsample_plan(37, 8, 0.632, seed).splits)
      CHECK(disjoint(split));
  }
}

TEST_CASE("invalid sizes are rejected") {
  CHECK_THROWS_AS(bootstrap_plan(1, 5, 0), Error);
  CHECK_THROWS_AS(bootstrap_plan(10, 1, 0), Error);
  CHECK_THROWS_AS(subsample_plan(10, 5, 0.0, 0), Error);
  CHECK_THROWS_AS(subsample_plan(10, 5, 1.0, 0), Error);
  CHECK_THROWS_AS(subsample_plan(10, 5, 0.05, 0), Error);  // floor(f*n) = 0
}

TEST_CASE("correction constant") {
  SECTION("fresh plans need no correction") {
    CHECK(correction_constant(fresh_plan(100, 15, 1)) == 0.0);
  }
  SECTION("subsample: deterministic n2/n1") {
    const ResamplePlan plan = subsample_plan(100, 15, 0.632, 5);
    CHECK(correction_constant(plan) ==
          Catch::Approx(37.0 / 63.0).margin(1e-12));
  }
  SECTION("bootstrap: Monte Carlo mean near 0.368/0.632") {
    double sum = 0.0;
    const std::size_t plans = 60;
    for (std::uint64_t seed = 0; seed < plans; ++seed)
      sum += correction_constant(bootstrap_plan(100, 15, seed));
    CHECK(sum / plans == Catch::Approx(0.368 / 0.632).margin(0.02));
  }
}

TEST_CASE("fresh plan layout") {
  const ResamplePlan plan = fresh_plan(100, 4, 9);
  for (const ResampleSplit& split : plan.splits) {
    CHECK(split.train.size() == 63);
    CHECK(split.test.size() == 37);
    CHECK(split.train.front() == 0);
    CHECK(split.test.front() == 63);
    CHECK(disjoint(split));
  }
}

TEST_CASE("plan JSON round trip") {
  const ResamplePlan plan = bootstrap_plan(50, 6, 123);
  const auto j = plan_to_json(plan);
  const ResamplePlan back = plan_from_json(j);
  CHECK(back.mode == plan.mode);
  CHECK(back.n == plan.n);
  CHECK(back.seed == plan.seed);
  REQUIRE(back.m() == plan.m());
  for (std::size_t d = 0; d < plan.m(); ++d) {
    CHECK(back.splits[d].train == plan.splits[d].train);
    CHECK(back.splits[d].test == plan.splits[d].test);
  }
  CHECK(correction_constant(back) == correction_constant(plan));
}
