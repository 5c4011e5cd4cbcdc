#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdpfi/dataset.hpp"
#include "pdpfi/inference.hpp"
#include "pdpfi/model.hpp"
#include "pdpfi/refit.hpp"
#include "pdpfi/serialize.hpp"

namespace pdpfi {

enum class GridKind { equidistant, quantile };
enum class EstimateKind { model, learner };

inline const char* estimate_kind_name(EstimateKind k) {
  return k == EstimateKind::model ? "model" : "learner";
}

/// Evaluation grid for a single feature: strictly increasing finite points.
struct PDGrid {
  std::size_t feature = 0;
  std::vector<double> points;

  std::size_t size() const { return points.size(); }
};

inline PDGrid make_grid_from_points(std::size_t feature,
                                    std::vector<double> points) {
  if (points.empty())
    throw Error(ErrorKind::InvalidSize, "grid needs at least one point");
  for (double v : points)
    if (!std::isfinite(v))
      throw Error(ErrorKind::NonFiniteValue, "non-finite grid point");
  for (std::size_t g = 1; g < points.size(); ++g)
    if (!(points[g - 1] < points[g]))
      throw Error(ErrorKind::InvalidArgument,
                  "grid points must be strictly increasing");
  return PDGrid{feature, std::move(points)};
}

/// Equidistant grids span [min, max] of the observed feature; quantile grids
/// take empirical quantiles at levels (g - 0.5) / G, deduplicated.
inline PDGrid make_grid(const Dataset& data, std::size_t feature,
                        std::size_t G, GridKind kind) {
  if (feature >= data.n_features())
    throw Error(ErrorKind::IndexOutOfBounds, "feature index out of range");
  if (G < 1) throw Error(ErrorKind::InvalidSize, "G must be >= 1");

  std::vector<double> column = data.features().column(feature);
  const auto [min_it, max_it] = std::minmax_element(column.begin(),
                                                    column.end());
  const double lo = *min_it;
  const double hi = *max_it;
  if (lo == hi && G > 1)
    throw Error(ErrorKind::ConstantFeature,
                "feature " + std::to_string(feature) +
                    " is constant; a multi-point grid is undefined");

  std::vector<double> points;
  if (kind == GridKind::equidistant) {
    if (G == 1) {
      points.push_back(0.5 * (lo + hi));
    } else {
      points.reserve(G);
      for (std::size_t g = 0; g < G; ++g)
        points.push_back(lo + (hi - lo) * static_cast<double>(g) /
                                  static_cast<double>(G - 1));
    }
  } else {
    std::sort(column.begin(), column.end());
    const std::size_t n = column.size();
    points.reserve(G);
    for (std::size_t g = 0; g < G; ++g) {
      const double level =
          (static_cast<double>(g) + 0.5) / static_cast<double>(G);
      // Linear interpolation between order statistics.
      const double pos = level * static_cast<double>(n - 1);
      const std::size_t i = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(i);
      const double q = i + 1 < n
                           ? column[i] + frac * (column[i + 1] - column[i])
                           : column[n - 1];
      if (points.empty() || q > points.back()) points.push_back(q);
    }
  }
  return make_grid_from_points(feature, std::move(points));
}

struct PDMeta {
  std::size_t sample_count = 0;  // n2 for model curves, m for learner curves
  double c = 0.0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::string learner;
  std::string resampling;
  std::vector<bool> extrapolated;  // per grid point, outside observed range
};

/// PD curve with a point-wise interval estimate at every grid point.
struct PDCurve {
  PDGrid grid;
  std::vector<IntervalEstimate> points;
  EstimateKind kind = EstimateKind::model;
  PDMeta meta;
};

namespace detail {

inline std::vector<bool> extrapolation_flags(const Dataset& data,
                                             const PDGrid& grid) {
  const std::vector<double> column = data.features().column(grid.feature);
  const auto [min_it, max_it] = std::minmax_element(column.begin(),
                                                    column.end());
  std::vector<bool> flags(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g)
    flags[g] = grid.points[g] < *min_it || grid.points[g] > *max_it;
  return flags;
}

/// Mean model prediction per grid point with the grid feature pinned;
/// optionally keeps the per-row predictions for variance estimation.
/// Predictions are sorted before aggregation so the result is exactly
/// invariant to the order of the test rows.
inline void pd_means(const Model& model, const IndexView& test,
                     const PDGrid& grid, std::vector<double>& means,
                     std::vector<std::vector<double>>* per_row = nullptr) {
  const std::size_t n2 = test.size();
  if (n2 == 0)
    throw Error(ErrorKind::TooFewRows, "PD evaluation on an empty view");
  Matrix x = test.gather_features();
  std::vector<double> pred(n2);
  means.assign(grid.size(), 0.0);
  if (per_row) per_row->assign(grid.size(), {});
  for (std::size_t g = 0; g < grid.size(); ++g) {
    x.fill_column(grid.feature, grid.points[g]);
    model.predict_into(x, pred);
    std::sort(pred.begin(), pred.end());
    double sum = 0.0;
    for (double v : pred) sum += v;
    means[g] = sum / static_cast<double>(n2);
    if (per_row) (*per_row)[g] = pred;
  }
}

/// m x G matrix of per-split model-PD means.
inline std::vector<std::vector<double>> per_split_pd_means(
    std::span<const ModelPtr> models, std::span<const IndexView> tests,
    const PDGrid& grid) {
  std::vector<std::vector<double>> out(models.size());
  for (std::size_t d = 0; d < models.size(); ++d)
    pd_means(*models[d], tests[d], grid, out[d]);
  return out;
}

}  // namespace detail

/// Model-PD: for each grid point x, the mean prediction over test rows with
/// the grid feature set to x. The variance is the Monte Carlo integration
/// error 1/(n2 (n2-1)) * sum (f(x, xC_i) - mean)^2, giving a t-band with
/// n2 - 1 degrees of freedom.
inline PDCurve model_pd(const Model& model, const IndexView& test,
                        const PDGrid& grid, double alpha) {
  const std::size_t n2 = test.size();
  if (n2 < 2)
    throw Error(ErrorKind::TooFewRows, "model_pd needs at least 2 test rows");
  if (grid.feature >= test.base->n_features())
    throw Error(ErrorKind::IndexOutOfBounds, "grid feature out of range");

  std::vector<double> means;
  std::vector<std::vector<double>> per_row;
  detail::pd_means(model, test, grid, means, &per_row);

  PDCurve curve;
  curve.grid = grid;
  curve.kind = EstimateKind::model;
  curve.meta.sample_count = n2;
  curve.meta.c = 0.0;
  curve.meta.alpha = alpha;
  curve.meta.extrapolated = detail::extrapolation_flags(*test.base, grid);
  curve.points.reserve(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g)
    curve.points.push_back(corrected_mean_ci(per_row[g], 0.0, alpha));
  return curve;
}

/// Learner-PD over pre-fitted refits: the per-split model-PD means enter the
/// corrected mean/variance/CI at every grid point.
inline PDCurve learner_pd(std::span<const ModelPtr> models,
                          std::span<const IndexView> tests, const PDGrid& grid,
                          double c, double alpha) {
  const std::size_t m = models.size();
  if (m < 2 || tests.size() != m)
    throw Error(ErrorKind::TooFewSplits,
                "learner_pd needs m >= 2 fitted splits");
  const auto pd_by_split = detail::per_split_pd_means(models, tests, grid);

  PDCurve curve;
  curve.grid = grid;
  curve.kind = EstimateKind::learner;
  curve.meta.sample_count = m;
  curve.meta.c = c;
  curve.meta.alpha = alpha;
  curve.meta.extrapolated =
      detail::extrapolation_flags(*tests[0].base, grid);
  curve.points.reserve(grid.size());
  std::vector<double> samples(m);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t d = 0; d < m; ++d) samples[d] = pd_by_split[d][g];
    curve.points.push_back(corrected_mean_ci(samples, c, alpha));
  }
  return curve;
}

inline PDCurve learner_pd(const PlanFits& fits, const PDGrid& grid,
                          double alpha) {
  PDCurve curve = learner_pd(fits.models, fits.tests, grid, fits.c, alpha);
  curve.meta.seed = fits.seed;
  curve.meta.learner = fits.learner;
  curve.meta.resampling = fits.resampling;
  return curve;
}

/// Learner-PD from scratch: fits one model per plan split (seed derived from
/// the split index) and aggregates with c = correction_constant(plan).
inline PDCurve learner_pd(const Learner& learner, const Dataset& data,
                          const ResamplePlan& plan, const PDGrid& grid,
                          double alpha, std::uint64_t seed,
                          unsigned threads = 1) {
  return learner_pd(fit_plan_models(learner, data, plan, seed, threads), grid,
                    alpha);
}

inline void pd_to_csv(const PDCurve& curve, const std::string& feature_name,
                      std::ostream& out) {
  out << "feature,grid_x,mean,variance,lower,upper,df\n";
  for (std::size_t g = 0; g < curve.grid.size(); ++g) {
    const IntervalEstimate& e = curve.points[g];
    out << feature_name << ',' << format_double(curve.grid.points[g]) << ','
        << format_double(e.mean) << ',' << format_double(e.variance) << ','
        << format_double(e.lower) << ',' << format_double(e.upper) << ','
        << e.df << '\n';
  }
}

inline nlohmann::ordered_json pd_to_json(const PDCurve& curve,
                                         const std::string& feature_name) {
  nlohmann::ordered_json j;
  j["feature"] = feature_name;
  j["kind"] = estimate_kind_name(curve.kind);
  j["alpha"] = curve.meta.alpha;
  j["c"] = curve.meta.c;
  j["sample_count"] = curve.meta.sample_count;
  j["seed"] = curve.meta.seed;
  if (!curve.meta.learner.empty()) j["learner"] = curve.meta.learner;
  if (!curve.meta.resampling.empty()) j["resampling"] = curve.meta.resampling;
  auto& pts = j["points"] = nlohmann::ordered_json::array();
  for (std::size_t g = 0; g < curve.grid.size(); ++g) {
    const IntervalEstimate& e = curve.points[g];
    pts.push_back({{"x", curve.grid.points[g]},
                   {"mean", e.mean},
                   {"variance", e.variance},
                   {"lower", e.lower},
                   {"upper", e.upper},
                   {"df", e.df},
                   {"extrapolated", bool(curve.meta.extrapolated[g])}});
  }
  return j;
}

}  // namespace pdpfi
