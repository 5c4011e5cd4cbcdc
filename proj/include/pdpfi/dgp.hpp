#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pdpfi/dataset.hpp"
#include "pdpfi/errors.hpp"
#include "pdpfi/rng.hpp"

namespace pdpfi {

/// Generative specification: y = f(x) + eps with features i.i.d. uniform on
/// [0, 1] and eps ~ Normal(0, noise_sigma^2). Built-ins:
///   linear     f(x) = x1 - x2                                   (p = 2)
///   nonlinear  f(x) = x1 - sqrt(1 - x2) + x3 x4 + (x4 / 10)^2   (p = 4)
struct DGPSpec {
  std::string name;
  std::function<double(std::span<const double>)> f;
  std::size_t p = 0;
  double noise_sigma = 1.0;
};

inline DGPSpec linear_dgp(double noise_sigma = 1.0) {
  return DGPSpec{"linear",
                 [](std::span<const double> x) { return x[0] - x[1]; }, 2,
                 noise_sigma};
}

inline DGPSpec nonlinear_dgp(double noise_sigma = 1.0) {
  return DGPSpec{"nonlinear",
                 [](std::span<const double> x) {
                   return x[0] - std::sqrt(1.0 - x[1]) + x[2] * x[3] +
                          (x[3] / 10.0) * (x[3] / 10.0);
                 },
                 4, noise_sigma};
}

inline DGPSpec dgp_by_name(const std::string& name, double noise_sigma = 1.0) {
  if (name == "linear") return linear_dgp(noise_sigma);
  if (name == "nonlinear") return nonlinear_dgp(noise_sigma);
  throw Error(ErrorKind::InvalidArgument, "unknown built-in DGP: " + name);
}

/// n i.i.d. rows from the DGP; per row the p uniforms are drawn first, the
/// noise term last. Feature names are x1..xp, the target is "y".
inline Dataset sample_dgp(const DGPSpec& spec, std::size_t n,
                          std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::InvalidSize, "sample_dgp needs n >= 1");
  Rng rng(seed);
  Matrix features(n, spec.p);
  std::vector<double> target(n);
  std::vector<double> row(spec.p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < spec.p; ++c) {
      row[c] = rng.uniform01();
      features(i, c) = row[c];
    }
    target[i] = spec.f(row) +
                (spec.noise_sigma > 0.0 ? rng.normal(0.0, spec.noise_sigma)
                                        : 0.0);
  }
  std::vector<std::string> names(spec.p);
  for (std::size_t c = 0; c < spec.p; ++c)
    names[c] = "x" + std::to_string(c + 1);
  return Dataset(std::move(features), std::move(names), std::move(target),
                 "y");
}

/// A ground-truth value with the standard error of its computation
/// (0 for closed forms).
struct OracleValue {
  double value = 0.0;
  double std_error = 0.0;
};

namespace detail {

// Uniform[0,1] moments used by the built-in closed forms:
//   E[U] = 1/2, E[U^2] = 1/3, Var[U] = 1/12, E[sqrt(1-U)] = 2/3,
//   E[(A-B)^2] = 1/6 for A,B iid.
inline std::optional<double> closed_form_dgp_pd(const DGPSpec& spec,
                                                std::size_t feature,
                                                double x) {
  if (spec.name == "linear" && spec.p == 2) {
    return feature == 0 ? x - 0.5 : 0.5 - x;
  }
  if (spec.name == "nonlinear" && spec.p == 4) {
    constexpr double e_sqrt = 2.0 / 3.0;      // E[sqrt(1 - X2)]
    constexpr double e_x3x4 = 0.25;           // E[X3 X4]
    constexpr double e_q = 1.0 / 300.0;       // E[(X4/10)^2]
    switch (feature) {
      case 0: return x - e_sqrt + e_x3x4 + e_q;
      case 1: return 0.5 - std::sqrt(1.0 - x) + e_x3x4 + e_q;
      case 2: return 0.5 - e_sqrt + 0.5 * x + e_q;
      case 3: return 0.5 - e_sqrt + 0.5 * x + x * x / 100.0;
    }
  }
  return std::nullopt;
}

inline std::optional<double> closed_form_dgp_pfi(const DGPSpec& spec,
                                                 std::size_t feature) {
  if (spec.name == "linear" && spec.p == 2) {
    return 1.0 / 6.0;  // E[(X - X~)^2] = 2 Var[X]
  }
  if (spec.name == "nonlinear" && spec.p == 4) {
    switch (feature) {
      case 0: return 1.0 / 6.0;
      case 1:
        // 2 Var[sqrt(1 - X2)] = 2 (1/2 - (2/3)^2)
        return 2.0 * (0.5 - 4.0 / 9.0);
      case 2:
        // E[((X3 - X3~) X4)^2] = 2 Var[X3] E[X4^2]
        return (1.0 / 6.0) * (1.0 / 3.0);
      case 3:
        // d = X3 (X4 - X4~) + (X4^2 - X4~^2) / 100; E[d^2] expands into
        // E[X3^2] E[(A-B)^2] + 2 E[X3] E[(A-B)(A^2-B^2)]/100
        //                    + E[(A^2-B^2)^2]/10^4
        // with E[(A-B)(A^2-B^2)] = 2 E[A^3] - 2 E[A] E[A^2] = 1/6 and
        // E[(A^2-B^2)^2] = 2 E[A^4] - 2 E[A^2]^2 = 8/45.
        return (1.0 / 3.0) * (1.0 / 6.0) + 2.0 * 0.5 * (1.0 / 6.0) / 100.0 +
               (8.0 / 45.0) / 1e4;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Monte Carlo DGP-PD: for each grid point x, the mean of f(x, X_C) over mc_n
/// uniform draws of the remaining features, with its standard error.
inline std::vector<OracleValue> dgp_pd_mc(const DGPSpec& spec,
                                          std::size_t feature,
                                          std::span<const double> grid,
                                          std::size_t mc_n,
                                          std::uint64_t seed) {
  if (feature >= spec.p)
    throw Error(ErrorKind::IndexOutOfBounds, "feature index out of range");
  if (mc_n < 2) throw Error(ErrorKind::InvalidSize, "mc_n must be >= 2");
  Rng rng(seed);
  std::vector<OracleValue> out(grid.size());
  std::vector<double> sum(grid.size(), 0.0), sumsq(grid.size(), 0.0);
  std::vector<double> row(spec.p);
  for (std::size_t i = 0; i < mc_n; ++i) {
    for (std::size_t c = 0; c < spec.p; ++c) row[c] = rng.uniform01();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double keep = row[feature];
      row[feature] = grid[g];
      const double v = spec.f(row);
      row[feature] = keep;
      sum[g] += v;
      sumsq[g] += v * v;
    }
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double mean = sum[g] / static_cast<double>(mc_n);
    const double var =
        (sumsq[g] - static_cast<double>(mc_n) * mean * mean) /
        static_cast<double>(mc_n - 1);
    out[g] = {mean, std::sqrt(std::max(0.0, var) / static_cast<double>(mc_n))};
  }
  return out;
}

/// DGP-PD: closed form for the built-ins, Monte Carlo otherwise.
inline std::vector<OracleValue> dgp_pd(const DGPSpec& spec, std::size_t feature,
                                       std::span<const double> grid,
                                       std::size_t mc_n, std::uint64_t seed) {
  if (feature >= spec.p)
    throw Error(ErrorKind::IndexOutOfBounds, "feature index out of range");
  if (!grid.empty()) {
    if (auto first = detail::closed_form_dgp_pd(spec, feature, grid[0])) {
      std::vector<OracleValue> out(grid.size());
      out[0] = {*first, 0.0};
      for (std::size_t g = 1; g < grid.size(); ++g)
        out[g] = {*detail::closed_form_dgp_pd(spec, feature, grid[g]), 0.0};
      return out;
    }
  }
  return dgp_pd_mc(spec, feature, grid, mc_n, seed);
}

/// Monte Carlo DGP-PFI under squared loss: E[(f(X) - f(X_S~, X_C))^2] with
/// X_S~ an independent marginal copy of the feature.
inline OracleValue dgp_pfi_mc(const DGPSpec& spec, std::size_t feature,
                              std::size_t mc_n, std::uint64_t seed) {
  if (feature >= spec.p)
    throw Error(ErrorKind::IndexOutOfBounds, "feature index out of range");
  if (mc_n < 2) throw Error(ErrorKind::InvalidSize, "mc_n must be >= 2");
  Rng rng(seed);
  double sum = 0.0, sumsq = 0.0;
  std::vector<double> row(spec.p);
  for (std::size_t i = 0; i < mc_n; ++i) {
    for (std::size_t c = 0; c < spec.p; ++c) row[c] = rng.uniform01();
    const double original = spec.f(row);
    const double keep = row[feature];
    row[feature] = rng.uniform01();
    const double replaced = spec.f(row);
    row[feature] = keep;
    const double d = original - replaced;
    sum += d * d;
    sumsq += d * d * d * d;
  }
  const double mean = sum / static_cast<double>(mc_n);
  const double var = (sumsq - static_cast<double>(mc_n) * mean * mean) /
                     static_cast<double>(mc_n - 1);
  return {mean, std::sqrt(std::max(0.0, var) / static_cast<double>(mc_n))};
}

/// DGP-PFI: closed form for the built-ins, Monte Carlo otherwise.
inline OracleValue dgp_pfi(const DGPSpec& spec, std::size_t feature,
                           std::size_t mc_n, std::uint64_t seed) {
  if (feature >= spec.p)
    throw Error(ErrorKind::IndexOutOfBounds, "feature index out of range");
  if (auto cf = detail::closed_form_dgp_pfi(spec, feature)) return {*cf, 0.0};
  return dgp_pfi_mc(spec, feature, mc_n, seed);
}

}  // namespace pdpfi
