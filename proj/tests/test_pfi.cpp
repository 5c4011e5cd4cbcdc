#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "pdpfi/dgp.hpp"
#include "pdpfi/linear.hpp"
#include "pdpfi/pfi.hpp"
#include "pdpfi/resampling.hpp"
#include "test_util.hpp"

using namespace pdpfi;
using pdpfi_test::make_dataset;
using pdpfi_test::uniform_dataset;

namespace {

bool same_multiset(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

// Exhaustive oracle for tiny test sets: averages Eq.-style loss differences
// over every permutation of the feature column, with its own loops.
double brute_force_pfi(const Model& model, const Dataset& data,
                       std::size_t feature) {
  const std::size_t n = data.n_rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Matrix x = data.features();
  const std::vector<double> original = x.column(feature);
  const std::vector<double> base = model.predict(data.features());

  double total = 0.0;
  std::size_t count = 0;
  do {
    for (std::size_t i = 0; i < n; ++i) x(i, feature) = original[perm[i]];
    const std::vector<double> pred = model.predict(x);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double permuted = data.target()[i] - pred[i];
      const double kept = data.target()[i] - base[i];
      sum += permuted * permuted - kept * kept;
    }
    total += sum / static_cast<double>(n);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total / static_cast<double>(count);
}

Learner constant_learner(double value) {
  return Learner{"const", [value](const IndexView&, std::uint64_t) -> ModelPtr {
                   return std::make_shared<FunctionModel>(
                       [value](std::span<const double>) { return value; },
                       "const");
                 }};
}

}  // namespace

TEST_CASE("replacement columns are rearrangements of the observed values") {
  const Dataset data = uniform_dataset(
      50, 3, [](const std::vector<double>& x) { return x[0]; }, 0.5, 21);
  const IndexView test = full_view(data);
  const std::vector<double> observed = data.features().column(1);

  SECTION("marginal") {
    ReplacementSampler sampler;
    sampler.l = 4;
    sampler.seed = 9;
    const auto columns = sample_replacements(test, 1, sampler);
    REQUIRE(columns.size() == 4);
    for (const auto& col : columns) CHECK(same_multiset(col, observed));
    CHECK_FALSE(columns[0] == columns[1]);  // different streams per k
  }
  SECTION("conditional, two features") {
    const Dataset two = uniform_dataset(
        40, 2, [](const std::vector<double>& x) { return x[0]; }, 0.5, 22);
    ReplacementSampler sampler;
    sampler.kind = SamplerKind::conditional_binned;
    sampler.l = 2;
    sampler.bins = 5;
    sampler.seed = 3;
    const auto columns = sample_replacements(full_view(two), 0, sampler);
    REQUIRE(columns.size() == 2);
    for (const auto& col : columns)
      CHECK(same_multiset(col, two.features().column(0)));
  }
}

TEST_CASE("conditional sampling permutes within bins of the other feature") {
  // With |C| = 1 the conditioning score is the other feature; rows are cut
  // into equal-frequency bins and the feature is shuffled only inside a bin.
  const std::size_t n = 30;
  std::vector<double> xs(n), other(n), y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    other[i] = static_cast<double>(i);       // already sorted: bin = i / 10
    xs[i] = static_cast<double>(i) * 10.0;   // distinct values track the bin
  }
  const Dataset data = make_dataset({xs, other}, y);
  ReplacementSampler sampler;
  sampler.kind = SamplerKind::conditional_binned;
  sampler.l = 3;
  sampler.bins = 3;
  sampler.seed = 5;
  const auto columns = sample_replacements(full_view(data), 0, sampler);
  for (const auto& col : columns)
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t bin = i / 10;
      CHECK(col[i] >= static_cast<double>(bin * 10) * 10.0);
      CHECK(col[i] < static_cast<double>((bin + 1) * 10) * 10.0);
    }
}

TEST_CASE("conditional sampling with |C| > 1 bins on the partial prediction") {
  const Dataset data = uniform_dataset(
      60, 3,
      [](const std::vector<double>& x) { return x[0] + 2.0 * x[1] - x[2]; },
      0.1, 23);
  const FunctionModel model(
      [](std::span<const double> x) { return x[0] + 2.0 * x[1] - x[2]; },
      "plane");
  ReplacementSampler sampler;
  sampler.kind = SamplerKind::conditional_binned;
  sampler.l = 2;
  sampler.bins = 4;
  sampler.seed = 6;
  SECTION("requires the model") {
    CHECK_THROWS_AS(sample_replacements(full_view(data), 0, sampler), Error);
  }
  SECTION("columns are rearrangements and model_pfi runs") {
    const auto columns =
        sample_replacements(full_view(data), 0, sampler, &model);
    REQUIRE(columns.size() == 2);
    for (const auto& col : columns)
      CHECK(same_multiset(col, data.features().column(0)));
    const PFIEstimate est =
        model_pfi(model, full_view(data), 0, sampler, 0.05);
    CHECK(est.estimate.mean > 0.0);
  }
}

TEST_CASE("sampler boundary policy") {
  const Dataset data = uniform_dataset(
      10, 2, [](const std::vector<double>& x) { return x[0]; }, 0.0, 1);
  ReplacementSampler sampler;
  sampler.kind = SamplerKind::conditional_binned;
  SECTION("bins = 1 is rejected") {
    sampler.bins = 1;
    CHECK_THROWS_AS(sample_replacements(full_view(data), 0, sampler), Error);
  }
  SECTION("bins > n2 / 2 is rejected") {
    sampler.bins = 6;  // n2 = 10 < 2 * 6
    try {
      sample_replacements(full_view(data), 0, sampler);
      FAIL("expected TooFewRows");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::TooFewRows);
    }
  }
  SECTION("marginal needs two rows") {
    ReplacementSampler marginal;
    CHECK_THROWS_AS(sample_replacements(view(data, {0}), 0, marginal), Error);
  }
}

TEST_CASE("marginal replacement decorrelates from other features") {
  const std::size_t n = 4000;
  Rng rng(31);
  std::vector<double> x1(n), x2(n), y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = rng.uniform01();
    x2[i] = 0.9 * x1[i] + 0.1 * rng.uniform01();  // strongly correlated
  }
  const Dataset data = make_dataset({x1, x2}, y);
  ReplacementSampler sampler;
  sampler.l = 1;
  sampler.seed = 8;
  const auto columns = sample_replacements(full_view(data), 0, sampler);
  auto corr = [n](const std::vector<double>& a, const std::vector<double>& b) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
  };
  CHECK(std::fabs(corr(x1, x2)) > 0.9);
  CHECK(std::fabs(corr(columns[0], x2)) < 0.05);
}

TEST_CASE("PFI of a feature the model ignores is exactly zero") {
  const Dataset data = uniform_dataset(
      30, 2, [](const std::vector<double>& x) { return x[1]; }, 0.4, 11);
  const FunctionModel model([](std::span<const double> x) { return x[1]; },
                            "uses_x2");
  ReplacementSampler sampler;
  sampler.l = 3;
  const PFIEstimate est =
      model_pfi(model, full_view(data), 0, sampler, 0.05);
  CHECK(est.estimate.mean == 0.0);
  CHECK(est.estimate.variance == 0.0);
  CHECK(est.estimate.lower == 0.0);
  CHECK(est.estimate.upper == 0.0);
}

TEST_CASE("PFI of a constant model is exactly zero") {
  const Dataset data = uniform_dataset(
      20, 2, [](const std::vector<double>& x) { return x[0]; }, 0.3, 12);
  const FunctionModel model([](std::span<const double>) { return 2.5; },
                            "const");
  ReplacementSampler sampler;
  const PFIEstimate est =
      model_pfi(model, full_view(data), 0, sampler, 0.05);
  CHECK(est.estimate.mean == 0.0);
  CHECK(est.estimate.variance == 0.0);
}

TEST_CASE("exhaustive model_pfi equals the all-permutations oracle") {
  // 4 rows: 24 permutations enumerated on both sides.
  const Dataset data =
      make_dataset({{0.1, 0.4, 0.7, 1.0}, {0.3, 0.9, 0.2, 0.6}},
                   {0.1, 0.4, 0.7, 1.0});  // y = x1 exactly
  const FunctionModel model([](std::span<const double> x) { return x[0]; },
                            "id");
  ReplacementSampler sampler;
  sampler.exhaustive = true;
  const PFIEstimate est =
      model_pfi(model, full_view(data), 0, sampler, 0.05);
  const double oracle = brute_force_pfi(model, data, 0);
  CHECK(est.estimate.mean == Catch::Approx(oracle).margin(1e-12));
  CHECK(est.meta.sample_count == 4);

  // Also on a nonlinear model over 5 rows (120 permutations).
  const Dataset five = uniform_dataset(
      5, 2, [](const std::vector<double>& x) { return x[0] * x[1]; }, 0.2, 3);
  const FunctionModel curved(
      [](std::span<const double> x) { return x[0] * x[1] + 0.3 * x[0]; },
      "curved");
  const PFIEstimate est5 =
      model_pfi(curved, full_view(five), 0, sampler, 0.05);
  CHECK(est5.estimate.mean ==
        Catch::Approx(brute_force_pfi(curved, five, 0)).margin(1e-12));
}

TEST_CASE("large l agrees with l = 1 averaged over seeds") {
  const Dataset data = uniform_dataset(
      120, 2, [](const std::vector<double>& x) { return x[0] - x[1]; }, 0.5,
      14);
  const FunctionModel model(
      [](std::span<const double> x) { return x[0] - x[1]; }, "truth");

  ReplacementSampler big;
  big.l = 200;
  big.seed = 100;
  const PFIEstimate with_big = model_pfi(model, full_view(data), 0, big, 0.05);

  std::vector<double> singles;
  for (std::uint64_t s = 0; s < 200; ++s) {
    ReplacementSampler one;
    one.l = 1;
    one.seed = derive_seed(777, s);
    singles.push_back(
        model_pfi(model, full_view(data), 0, one, 0.05).estimate.mean);
  }
  double mean = std::accumulate(singles.begin(), singles.end(), 0.0) /
                static_cast<double>(singles.size());
  double sd = 0.0;
  for (double v : singles) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / (singles.size() - 1.0) /
                 static_cast<double>(singles.size()));
  const double combined = 3.0 * (sd + std::sqrt(with_big.estimate.variance));
  CHECK(std::fabs(with_big.estimate.mean - mean) <= combined);
}

TEST_CASE("learner_pfi basics") {
  const Dataset data = uniform_dataset(
      60, 2, [](const std::vector<double>& x) { return x[0] - x[1]; }, 1.0,
      15);
  const ResamplePlan plan = bootstrap_plan(60, 6, 4);
  ReplacementSampler sampler;
  sampler.l = 2;
  sampler.seed = 5;

  SECTION("constant learner gives exactly zero") {
    const PFIEstimate est =
        learner_pfi(constant_learner(1.0), data, plan, 0, sampler, 0.05, 2);
    CHECK(est.estimate.mean == 0.0);
    CHECK(est.estimate.variance == 0.0);
  }
  SECTION("mean equals the arithmetic mean of per-split values") {
    const std::uint64_t seed = 77;
    const PFIEstimate est =
        learner_pfi(linear_learner(), data, plan, 0, sampler, 0.05, seed);
    const PlanFits fits = fit_plan_models(linear_learner(), data, plan, seed);
    const std::vector<double> values =
        detail::per_split_pfi_values(fits.models, fits.tests, 0, sampler);
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                        static_cast<double>(values.size());
    CHECK(est.estimate.mean == mean);
    CHECK(est.meta.c == Catch::Approx(correction_constant(plan)));
    CHECK(est.estimate.df == plan.m() - 1);
  }
}

TEST_CASE("learner_pfi on the linear DGP approaches 2 Var(X1) = 1/6") {
  // lm is unbiased for the linear DGP and features are independent, so the
  // marginal learner-PFI estimates the DGP-PFI.
  const DGPSpec spec = linear_dgp();
  const Dataset data = sample_dgp(spec, 4000, 99);
  const ResamplePlan plan = bootstrap_plan(4000, 8, 1);
  ReplacementSampler sampler;
  sampler.l = 5;
  sampler.seed = 3;
  const PFIEstimate est =
      learner_pfi(linear_learner(), data, plan, 0, sampler, 0.05, 7);
  const double oracle = dgp_pfi(spec, 0, 100000, 5).value;
  CHECK(oracle == Catch::Approx(1.0 / 6.0).margin(1e-12));
  CHECK(est.estimate.mean == Catch::Approx(oracle).margin(0.02));
}

TEST_CASE("compare_learners") {
  SECTION("identical losses give a degenerate zero interval") {
    const std::vector<std::vector<double>> a = {{1, 2, 3}, {2, 2, 2}};
    const IntervalEstimate e = compare_learners(a, a, 0.5, 0.05);
    CHECK(e.mean == 0.0);
    CHECK(e.lower == 0.0);
    CHECK(e.upper == 0.0);
  }
  SECTION("constant per-instance shift gives a degenerate [1, 1]") {
    const std::vector<std::vector<double>> a = {{1, 2, 3}, {2, 2, 2},
                                                {0, 1, 0}};
    std::vector<std::vector<double>> b = a;
    for (auto& split : b)
      for (double& v : split) v += 1.0;
    const IntervalEstimate e = compare_learners(b, a, 0.3, 0.05);
    CHECK(e.mean == Catch::Approx(1.0).margin(1e-15));
    CHECK(e.width() < 1e-12);
  }
  SECTION("mismatched plans are rejected") {
    const std::vector<std::vector<double>> a = {{1, 2}, {3, 4}};
    const std::vector<std::vector<double>> fewer = {{1, 2}};
    const std::vector<std::vector<double>> ragged = {{1, 2}, {3}};
    CHECK_THROWS_AS(compare_learners(a, fewer, 0.0, 0.05), Error);
    CHECK_THROWS_AS(compare_learners(a, ragged, 0.0, 0.05), Error);
  }
}

TEST_CASE("pfi_ranking") {
  auto make_estimate = [](std::size_t feature, double mean, double half) {
    PFIEstimate est;
    est.feature = feature;
    est.estimate.mean = mean;
    est.estimate.lower = mean - half;
    est.estimate.upper = mean + half;
    est.estimate.alpha = 0.05;
    est.kind = EstimateKind::learner;
    return est;
  };
  SECTION("disjoint intervals keep order, overlap = false") {
    const auto ranked = pfi_ranking(
        {make_estimate(0, 3.0, 0.1), make_estimate(1, 1.0, 0.1)});
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].estimate.feature == 0);
    CHECK_FALSE(ranked[0].overlaps_next);
  }
  SECTION("identical estimates tie-break by feature index, overlap = true") {
    const auto ranked = pfi_ranking(
        {make_estimate(2, 1.0, 0.2), make_estimate(0, 1.0, 0.2),
         make_estimate(1, 1.0, 0.2)});
    CHECK(ranked[0].estimate.feature == 0);
    CHECK(ranked[1].estimate.feature == 1);
    CHECK(ranked[2].estimate.feature == 2);
    CHECK(ranked[0].overlaps_next);
    CHECK(ranked[1].overlaps_next);
  }
  SECTION("input order does not matter") {
    const std::vector<PFIEstimate> base = {make_estimate(0, 0.5, 0.3),
                                           make_estimate(1, 2.0, 0.2),
                                           make_estimate(2, 1.0, 0.4)};
    std::vector<PFIEstimate> shuffled = {base[2], base[0], base[1]};
    const auto a = pfi_ranking(base);
    const auto b = pfi_ranking(shuffled);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].estimate.feature == b[i].estimate.feature);
      CHECK(a[i].overlaps_next == b[i].overlaps_next);
    }
  }
  SECTION("mixed kinds are rejected") {
    auto model_kind = make_estimate(0, 1.0, 0.1);
    model_kind.kind = EstimateKind::model;
    CHECK_THROWS_AS(pfi_ranking({model_kind, make_estimate(1, 2.0, 0.1)}),
                    Error);
  }
}
