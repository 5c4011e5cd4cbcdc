#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdpfi/dataset.hpp"
#include "pdpfi/inference.hpp"
#include "pdpfi/model.hpp"
#include "pdpfi/pd.hpp"
#include "pdpfi/refit.hpp"
#include "pdpfi/rng.hpp"
#include "pdpfi/serialize.hpp"

namespace pdpfi {

enum class SamplerKind { marginal, conditional_binned };

/// How replacement values for the feature of interest are drawn.
///   marginal            — seeded permutations of the observed column.
///   conditional_binned  — permutations within equal-frequency bins of a
///                         conditioning score, approximating P(X_S | X_C).
/// `exhaustive` upgrades marginal sampling to all n2! permutations (tiny test
/// sets only); `l` is ignored in that case.
struct ReplacementSampler {
  SamplerKind kind = SamplerKind::marginal;
  std::size_t l = 5;
  std::size_t bins = 10;  // conditional only
  std::uint64_t seed = 0;
  bool exhaustive = false;

  std::string describe() const {
    std::string s = kind == SamplerKind::marginal ? "marginal" : "conditional_binned";
    s += "(l=" + std::to_string(l);
    if (kind == SamplerKind::conditional_binned)
      s += ",bins=" + std::to_string(bins);
    if (exhaustive) s += ",exhaustive";
    s += ",seed=" + std::to_string(seed) + ")";
    return s;
  }
};

namespace detail {

inline std::vector<std::vector<double>> all_permutation_columns(
    const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n > 8)
    throw Error(ErrorKind::InvalidSize,
                "exhaustive enumeration limited to n2 <= 8");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::vector<double>> columns;
  do {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = values[perm[i]];
    columns.push_back(std::move(col));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return columns;
}

/// Conditioning score for binned conditional sampling: with one remaining
/// feature, that feature itself; otherwise the model's partial prediction
/// with the feature of interest pinned at its median.
inline std::vector<double> conditioning_score(const IndexView& test,
                                              std::size_t feature,
                                              const Model* model) {
  const std::size_t p = test.base->n_features();
  if (p == 2) {
    const std::size_t other = feature == 0 ? 1 : 0;
    std::vector<double> score(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
      score[i] = test.base->features()(test.rows[i], other);
    return score;
  }
  if (model == nullptr)
    throw Error(ErrorKind::InvalidArgument,
                "conditional sampling with |C| > 1 needs the model for the "
                "partial-prediction score");
  std::vector<double> column(test.size());
  for (std::size_t i = 0; i < test.size(); ++i)
    column[i] = test.base->features()(test.rows[i], feature);
  std::vector<double> sorted(column);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1
                            ? sorted[n / 2]
                            : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  Matrix x = test.gather_features();
  x.fill_column(feature, median);
  std::vector<double> score(test.size());
  model->predict_into(x, score);
  return score;
}

}  // namespace detail

/// Draws l replacement columns for the feature over the test rows. Each
/// column is a rearrangement of the observed values (multiset-preserving).
inline std::vector<std::vector<double>> sample_replacements(
    const IndexView& test, std::size_t feature,
    const ReplacementSampler& sampler, const Model* model = nullptr) {
  const std::size_t n2 = test.size();
  if (feature >= test.base->n_features())
    throw Error(ErrorKind::IndexOutOfBounds, "feature index out of range");

  std::vector<double> values(n2);
  for (std::size_t i = 0; i < n2; ++i)
    values[i] = test.base->features()(test.rows[i], feature);

  if (sampler.kind == SamplerKind::marginal) {
    if (n2 < 2)
      throw Error(ErrorKind::TooFewRows, "marginal sampling needs n2 >= 2");
    if (sampler.exhaustive) return detail::all_permutation_columns(values);
    if (sampler.l < 1)
      throw Error(ErrorKind::InvalidSize, "sampler needs l >= 1");
    std::vector<std::vector<double>> columns(sampler.l);
    for (std::size_t k = 0; k < sampler.l; ++k) {
      columns[k] = values;
      Rng rng(derive_seed(sampler.seed, k));
      shuffle(columns[k], rng);
    }
    return columns;
  }

  // conditional_binned
  if (sampler.l < 1)
    throw Error(ErrorKind::InvalidSize, "sampler needs l >= 1");
  if (sampler.bins < 2)
    throw Error(ErrorKind::InvalidSize, "conditional sampling needs bins >= 2");
  if (n2 < 2 * sampler.bins)
    throw Error(ErrorKind::TooFewRows,
                "conditional sampling needs n2 >= 2 * bins");

  const std::vector<double> score =
      detail::conditioning_score(test, feature, model);
  std::vector<std::size_t> rank(n2);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::sort(rank.begin(), rank.end(), [&score](std::size_t a, std::size_t b) {
    return score[a] != score[b] ? score[a] < score[b] : a < b;
  });

  std::vector<std::vector<double>> columns(sampler.l, values);
  for (std::size_t k = 0; k < sampler.l; ++k) {
    std::size_t start = 0;
    for (std::size_t b = 0; b < sampler.bins; ++b) {
      const std::size_t stop = (b + 1) * n2 / sampler.bins;
      std::vector<double> bucket(stop - start);
      for (std::size_t i = start; i < stop; ++i)
        bucket[i - start] = values[rank[i]];
      Rng rng(derive_seed(sampler.seed, k, b));
      shuffle(bucket, rng);
      for (std::size_t i = start; i < stop; ++i)
        columns[k][rank[i]] = bucket[i - start];
      start = stop;
    }
  }
  return columns;
}

struct PFIMeta {
  std::size_t sample_count = 0;  // n2 for model, m for learner
  double c = 0.0;
  std::uint64_t seed = 0;
  std::string learner;
  std::string resampling;
};

struct PFIEstimate {
  std::size_t feature = 0;
  IntervalEstimate estimate;
  EstimateKind kind = EstimateKind::model;
  ReplacementSampler sampler;
  PFIMeta meta;
};

/// Per-row PFI contributions:
///   L_i = (1/l) sum_k loss(y_i, f(x~_k,i, xC_i)) - loss(y_i, f(x_i)).
inline std::vector<double> pfi_loss_diffs(const Model& model,
                                          const IndexView& test,
                                          std::size_t feature,
                                          const ReplacementSampler& sampler,
                                          const PerInstanceLoss& loss =
                                              l2_loss) {
  const std::size_t n2 = test.size();
  if (n2 < 2)
    throw Error(ErrorKind::TooFewRows, "PFI needs at least 2 test rows");

  const std::vector<std::vector<double>> columns =
      sample_replacements(test, feature, sampler, &model);
  const std::vector<double> y = test.gather_target();

  Matrix x = test.gather_features();
  std::vector<double> pred(n2);
  model.predict_into(x, pred);
  std::vector<double> base_loss(n2);
  for (std::size_t i = 0; i < n2; ++i) base_loss[i] = loss(y[i], pred[i]);

  // Differences are taken per repetition before averaging, so an unchanged
  // prediction contributes an exact zero.
  const double inv_l = 1.0 / static_cast<double>(columns.size());
  std::vector<double> diff_sum(n2, 0.0);
  for (const std::vector<double>& col : columns) {
    x.set_column(feature, col);
    model.predict_into(x, pred);
    for (std::size_t i = 0; i < n2; ++i)
      diff_sum[i] += loss(y[i], pred[i]) - base_loss[i];
  }
  std::vector<double> loss_diff(n2);
  for (std::size_t i = 0; i < n2; ++i) loss_diff[i] = inv_l * diff_sum[i];
  return loss_diff;
}

/// Model-PFI: mean of the per-row contributions, with Monte Carlo variance
/// 1/(n2 (n2-1)) sum (L_i - mean)^2 and a t-interval with n2 - 1 degrees of
/// freedom.
inline PFIEstimate model_pfi(const Model& model, const IndexView& test,
                             std::size_t feature,
                             const ReplacementSampler& sampler, double alpha,
                             const PerInstanceLoss& loss = l2_loss) {
  const std::vector<double> loss_diff =
      pfi_loss_diffs(model, test, feature, sampler, loss);
  PFIEstimate out;
  out.feature = feature;
  out.estimate = corrected_mean_ci(loss_diff, 0.0, alpha);
  out.kind = EstimateKind::model;
  out.sampler = sampler;
  out.meta.sample_count = test.size();
  out.meta.seed = sampler.seed;
  return out;
}

namespace detail {

/// Per-split model-PFI point estimates; split d permutes with a sampler
/// stream derived from (sampler.seed, d).
inline std::vector<double> per_split_pfi_values(
    std::span<const ModelPtr> models, std::span<const IndexView> tests,
    std::size_t feature, const ReplacementSampler& sampler,
    const PerInstanceLoss& loss = l2_loss) {
  std::vector<double> values(models.size());
  for (std::size_t d = 0; d < models.size(); ++d) {
    ReplacementSampler split_sampler = sampler;
    split_sampler.seed = derive_seed(sampler.seed, d);
    const std::vector<double> diffs =
        pfi_loss_diffs(*models[d], tests[d], feature, split_sampler, loss);
    double sum = 0.0;
    for (double v : diffs) sum += v;
    values[d] = sum / static_cast<double>(diffs.size());
  }
  return values;
}

}  // namespace detail

/// Learner-PFI over pre-fitted refits: per-split model-PFI point estimates
/// enter the corrected mean/variance/CI.
inline PFIEstimate learner_pfi(std::span<const ModelPtr> models,
                               std::span<const IndexView> tests,
                               std::size_t feature,
                               const ReplacementSampler& sampler, double c,
                               double alpha,
                               const PerInstanceLoss& loss = l2_loss) {
  const std::size_t m = models.size();
  if (m < 2 || tests.size() != m)
    throw Error(ErrorKind::TooFewSplits,
                "learner_pfi needs m >= 2 fitted splits");
  const std::vector<double> values =
      detail::per_split_pfi_values(models, tests, feature, sampler, loss);

  PFIEstimate out;
  out.feature = feature;
  out.estimate = corrected_mean_ci(values, c, alpha);
  out.kind = EstimateKind::learner;
  out.sampler = sampler;
  out.meta.sample_count = m;
  out.meta.c = c;
  out.meta.seed = sampler.seed;
  return out;
}

inline PFIEstimate learner_pfi(const PlanFits& fits, std::size_t feature,
                               const ReplacementSampler& sampler, double alpha,
                               const PerInstanceLoss& loss = l2_loss) {
  PFIEstimate out = learner_pfi(fits.models, fits.tests, feature, sampler,
                                fits.c, alpha, loss);
  out.meta.seed = fits.seed;
  out.meta.learner = fits.learner;
  out.meta.resampling = fits.resampling;
  return out;
}

/// Learner-PFI from scratch: fits one model per plan split and aggregates
/// with c = correction_constant(plan).
inline PFIEstimate learner_pfi(const Learner& learner, const Dataset& data,
                               const ResamplePlan& plan, std::size_t feature,
                               const ReplacementSampler& sampler, double alpha,
                               std::uint64_t seed, unsigned threads = 1,
                               const PerInstanceLoss& loss = l2_loss) {
  return learner_pfi(fit_plan_models(learner, data, plan, seed, threads),
                     feature, sampler, alpha, loss);
}

/// Corrected interval for the mean per-split loss difference of two learners
/// evaluated on the identical plan: Delta_d = MSE_A,d - MSE_B,d.
inline IntervalEstimate compare_learners(
    const std::vector<std::vector<double>>& per_split_losses_a,
    const std::vector<std::vector<double>>& per_split_losses_b, double c,
    double alpha) {
  if (per_split_losses_a.size() != per_split_losses_b.size())
    throw Error(ErrorKind::PlanMismatch,
                "learners were evaluated on different numbers of splits");
  const std::size_t m = per_split_losses_a.size();
  if (m < 2) throw Error(ErrorKind::TooFewSplits, "need m >= 2 splits");
  std::vector<double> delta(m);
  for (std::size_t d = 0; d < m; ++d) {
    const auto& a = per_split_losses_a[d];
    const auto& b = per_split_losses_b[d];
    if (a.size() != b.size() || a.empty())
      throw Error(ErrorKind::PlanMismatch,
                  "split " + std::to_string(d) +
                      " has mismatched test sizes; identical plans required");
    const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) /
                          static_cast<double>(a.size());
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) /
                          static_cast<double>(b.size());
    delta[d] = mean_a - mean_b;
  }
  return corrected_mean_ci(delta, c, alpha);
}

struct RankedPFI {
  PFIEstimate estimate;
  bool overlaps_next = false;  // interval overlap with the next-ranked entry
};

/// Sorts estimates by mean (descending; ties by feature index) and annotates
/// each adjacent pair with whether the confidence intervals overlap.
inline std::vector<RankedPFI> pfi_ranking(std::vector<PFIEstimate> estimates) {
  for (std::size_t i = 1; i < estimates.size(); ++i)
    if (estimates[i].kind != estimates[0].kind ||
        estimates[i].estimate.alpha != estimates[0].estimate.alpha)
      throw Error(ErrorKind::MixedKinds,
                  "ranking requires a single kind and alpha");
  std::sort(estimates.begin(), estimates.end(),
            [](const PFIEstimate& a, const PFIEstimate& b) {
              if (a.estimate.mean != b.estimate.mean)
                return a.estimate.mean > b.estimate.mean;
              return a.feature < b.feature;
            });
  std::vector<RankedPFI> ranked(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i)
    ranked[i].estimate = std::move(estimates[i]);
  for (std::size_t i = 0; i + 1 < ranked.size(); ++i) {
    const IntervalEstimate& a = ranked[i].estimate.estimate;
    const IntervalEstimate& b = ranked[i + 1].estimate.estimate;
    ranked[i].overlaps_next = a.lower <= b.upper && b.lower <= a.upper;
  }
  return ranked;
}

inline void pfi_table_to_csv(const std::vector<RankedPFI>& ranked,
                             const std::vector<std::string>& feature_names,
                             std::ostream& out) {
  out << "feature,mean,variance,lower,upper,df,kind,sampler,overlap_with_next\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const PFIEstimate& est = ranked[i].estimate;
    const IntervalEstimate& e = est.estimate;
    out << feature_names[est.feature] << ',' << format_double(e.mean) << ','
        << format_double(e.variance) << ',' << format_double(e.lower) << ','
        << format_double(e.upper) << ',' << e.df << ','
        << estimate_kind_name(est.kind) << ',' << est.sampler.describe() << ',';
    if (i + 1 < ranked.size()) out << (ranked[i].overlaps_next ? "1" : "0");
    out << '\n';
  }
}

inline nlohmann::ordered_json pfi_to_json(
    const std::vector<RankedPFI>& ranked,
    const std::vector<std::string>& feature_names) {
  auto arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const PFIEstimate& est = ranked[i].estimate;
    const IntervalEstimate& e = est.estimate;
    nlohmann::ordered_json row{{"feature", feature_names[est.feature]},
                               {"mean", e.mean},
                               {"variance", e.variance},
                               {"lower", e.lower},
                               {"upper", e.upper},
                               {"df", e.df},
                               {"kind", estimate_kind_name(est.kind)},
                               {"sampler", est.sampler.describe()},
                               {"c", est.meta.c},
                               {"seed", est.meta.seed}};
    if (i + 1 < ranked.size()) row["overlap_with_next"] = ranked[i].overlaps_next;
    arr.push_back(std::move(row));
  }
  return arr;
}

}  // namespace pdpfi
