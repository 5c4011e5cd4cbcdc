#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdpfi/errors.hpp"
#include "pdpfi/rng.hpp"

namespace pdpfi {

enum class ResampleMode { bootstrap, subsample, fresh };

inline const char* resample_mode_name(ResampleMode m) {
  switch (m) {
    case ResampleMode::bootstrap: return "bootstrap";
    case ResampleMode::subsample: return "subsample";
    case ResampleMode::fresh: return "fresh";
  }
  return "unknown";
}

inline ResampleMode resample_mode_from(const std::string& s) {
  if (s == "bootstrap") return ResampleMode::bootstrap;
  if (s == "subsample") return ResampleMode::subsample;
  if (s == "fresh") return ResampleMode::fresh;
  throw Error(ErrorKind::InvalidArgument, "unknown resampling mode: " + s);
}

struct ResampleSplit {
  std::vector<std::size_t> train;  // multiplicity preserved for bootstrap
  std::vector<std::size_t> test;   // always disjoint from train as a set
};

/// m train/test index pairs over one dataset of n rows. In fresh mode the
/// splits describe the per-refit holdout layout of independently generated
/// datasets (simulation harness only) and the correction constant is 0.
struct ResamplePlan {
  ResampleMode mode = ResampleMode::bootstrap;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<ResampleSplit> splits;
  std::size_t redraws = 0;  // bootstrap splits redrawn for an empty OOB set

  std::size_t m() const { return splits.size(); }
};

namespace detail {

inline std::size_t count_distinct(const std::vector<std::size_t>& v) {
  std::vector<std::size_t> sorted(v);
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(
      std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

}  // namespace detail

/// m seeded with-replacement draws of size n; each split's test set is the
/// out-of-bag complement. A split whose OOB set comes up empty is redrawn
/// with the next derived seed and counted in `redraws`.
inline ResamplePlan bootstrap_plan(std::size_t n, std::size_t m,
                                   std::uint64_t seed) {
  if (n < 2 || m < 2)
    throw Error(ErrorKind::InvalidSize, "bootstrap_plan needs n >= 2, m >= 2");
  ResamplePlan plan{ResampleMode::bootstrap, n, seed, {}, 0};
  plan.splits.resize(m);
  for (std::size_t d = 0; d < m; ++d) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng rng(derive_seed(seed, d, attempt));
      std::vector<std::size_t> train(n);
      std::vector<bool> seen(n, false);
      for (std::size_t i = 0; i < n; ++i) {
        train[i] = rng.bounded(n);
        seen[train[i]] = true;
      }
      std::vector<std::size_t> test;
      for (std::size_t i = 0; i < n; ++i)
        if (!seen[i]) test.push_back(i);
      if (test.empty()) {
        ++plan.redraws;
        continue;
      }
      plan.splits[d] = {std::move(train), std::move(test)};
      break;
    }
  }
  return plan;
}

/// m seeded draws of floor(fraction * n) distinct indices; test = complement.
inline ResamplePlan subsample_plan(std::size_t n, std::size_t m,
                                   double fraction, std::uint64_t seed) {
  if (n < 2 || m < 2)
    throw Error(ErrorKind::InvalidSize, "subsample_plan needs n >= 2, m >= 2");
  const std::size_t k = static_cast<std::size_t>(
      fraction * static_cast<double>(n));
  if (!(fraction > 0.0 && fraction < 1.0) || k < 1 || k > n - 1)
    throw Error(ErrorKind::InvalidSize,
                "subsample fraction must leave 1 <= floor(f*n) <= n-1");
  ResamplePlan plan{ResampleMode::subsample, n, seed, {}, 0};
  plan.splits.resize(m);
  for (std::size_t d = 0; d < m; ++d) {
    Rng rng(derive_seed(seed, d));
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.bounded(n - i);
      std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> train(pool.begin(), pool.begin() + k);
    std::sort(train.begin(), train.end());
    std::vector<std::size_t> test(pool.begin() + k, pool.end());
    std::sort(test.begin(), test.end());
    plan.splits[d] = {std::move(train), std::move(test)};
  }
  return plan;
}

/// Fixed 63.2%/36.8% holdout layout repeated m times; each split is meant to
/// be applied to its own freshly generated dataset of n rows.
inline ResamplePlan fresh_plan(std::size_t n, std::size_t m,
                               std::uint64_t seed) {
  if (n < 2 || m < 2)
    throw Error(ErrorKind::InvalidSize, "fresh_plan needs n >= 2, m >= 2");
  const std::size_t k = static_cast<std::size_t>(0.632 * static_cast<double>(n));
  ResamplePlan plan{ResampleMode::fresh, n, seed, {}, 0};
  plan.splits.resize(m);
  for (std::size_t d = 0; d < m; ++d) {
    std::vector<std::size_t> train(k);
    std::iota(train.begin(), train.end(), std::size_t{0});
    std::vector<std::size_t> test(n - k);
    std::iota(test.begin(), test.end(), k);
    plan.splits[d] = {std::move(train), std::move(test)};
  }
  return plan;
}

/// Nadeau-Bengio correction constant: mean over splits of n2/n1, with n1
/// counting distinct training indices. Fresh plans need no correction.
inline double correction_constant(const ResamplePlan& plan) {
  if (plan.mode == ResampleMode::fresh) return 0.0;
  if (plan.splits.empty())
    throw Error(ErrorKind::InvalidSize, "plan has no splits");
  double sum = 0.0;
  for (const ResampleSplit& split : plan.splits) {
    const std::size_t n1 = detail::count_distinct(split.train);
    sum += static_cast<double>(split.test.size()) / static_cast<double>(n1);
  }
  return sum / static_cast<double>(plan.splits.size());
}

inline nlohmann::ordered_json plan_to_json(const ResamplePlan& plan) {
  nlohmann::ordered_json j;
  j["mode"] = resample_mode_name(plan.mode);
  j["n"] = plan.n;
  j["seed"] = plan.seed;
  j["m"] = plan.m();
  j["redraws"] = plan.redraws;
  j["correction_constant"] = correction_constant(plan);
  auto& splits = j["splits"] = nlohmann::ordered_json::array();
  for (const ResampleSplit& split : plan.splits)
    splits.push_back({{"train", split.train}, {"test", split.test}});
  return j;
}

inline ResamplePlan plan_from_json(const nlohmann::json& j) {
  ResamplePlan plan;
  plan.mode = resample_mode_from(j.at("mode").get<std::string>());
  plan.n = j.at("n").get<std::size_t>();
  plan.seed = j.at("seed").get<std::uint64_t>();
  plan.redraws = j.value("redraws", std::size_t{0});
  for (const auto& s : j.at("splits")) {
    ResampleSplit split;
    split.train = s.at("train").get<std::vector<std::size_t>>();
    split.test = s.at("test").get<std::vector<std::size_t>>();
    plan.splits.push_back(std::move(split));
  }
  return plan;
}

}  // namespace pdpfi
