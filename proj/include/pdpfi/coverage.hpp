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

#include "pdpfi/dgp.hpp"
#include "pdpfi/learner_spec.hpp"
#include "pdpfi/parallel.hpp"
#include "pdpfi/pd.hpp"
#include "pdpfi/pfi.hpp"
#include "pdpfi/resampling.hpp"
#include "pdpfi/serialize.hpp"

namespace pdpfi {

/// One simulation cell: a DGP, a learner, a resampling layout and the
/// desk-scale experiment sizes. `grid` holds the PD grid points shared by
/// every feature; PFI uses marginal sampling with `pfi_l` repetitions.
struct CoverageConfig {
  DGPSpec dgp = linear_dgp();
  LearnerSpec learner{};
  std::size_t n = 100;
  std::size_t m = 15;
  ResampleMode resampling = ResampleMode::bootstrap;
  bool corrected = true;
  double alpha = 0.05;
  std::size_t repetitions = 1000;
  std::size_t reference_runs = 2000;
  std::vector<double> grid = {0.1, 0.3, 0.5, 0.7, 0.9};
  std::uint64_t seed = 1;
  std::size_t pfi_l = 5;
  unsigned threads = 1;

  void validate() const {
    if (repetitions < 1)
      throw Error(ErrorKind::InvalidSize, "repetitions must be >= 1");
    if (reference_runs < 100)
      throw Error(ErrorKind::InvalidSize, "reference_runs must be >= 100");
    if (m < 2) throw Error(ErrorKind::InvalidSize, "m must be >= 2");
    if (n < 4) throw Error(ErrorKind::InvalidSize, "n must be >= 4");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw Error(ErrorKind::InvalidProbability, "alpha must be in (0,1)");
    if (grid.empty())
      throw Error(ErrorKind::InvalidSize, "grid must be non-empty");
    if (pfi_l < 1) throw Error(ErrorKind::InvalidSize, "pfi_l must be >= 1");
  }
};

inline CoverageConfig coverage_config_from_json(const nlohmann::json& j) {
  CoverageConfig cfg;
  cfg.dgp = dgp_by_name(j.at("dgp").get<std::string>(),
                        j.value("noise_sigma", 1.0));
  if (j.contains("learner")) cfg.learner = learner_spec_from_json(j.at("learner"));
  cfg.n = j.value("n", cfg.n);
  cfg.m = j.value("m", cfg.m);
  cfg.resampling =
      resample_mode_from(j.value("resampling", std::string("bootstrap")));
  cfg.corrected = j.value("corrected", cfg.corrected);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.repetitions = j.value("repetitions", cfg.repetitions);
  cfg.reference_runs = j.value("reference_runs", cfg.reference_runs);
  if (j.contains("grid")) cfg.grid = j.at("grid").get<std::vector<double>>();
  cfg.seed = j.value("seed", cfg.seed);
  cfg.pfi_l = j.value("pfi_l", cfg.pfi_l);
  cfg.validate();
  return cfg;
}

inline nlohmann::ordered_json coverage_config_to_json(
    const CoverageConfig& cfg) {
  nlohmann::ordered_json j;
  j["dgp"] = cfg.dgp.name;
  j["noise_sigma"] = cfg.dgp.noise_sigma;
  j["learner"] = learner_spec_to_json(cfg.learner);
  j["n"] = cfg.n;
  j["m"] = cfg.m;
  j["resampling"] = resample_mode_name(cfg.resampling);
  j["corrected"] = cfg.corrected;
  j["alpha"] = cfg.alpha;
  j["repetitions"] = cfg.repetitions;
  j["reference_runs"] = cfg.reference_runs;
  j["grid"] = cfg.grid;
  j["seed"] = cfg.seed;
  j["pfi_l"] = cfg.pfi_l;
  return j;
}

/// Reference targets E_F[PD] per (feature, grid point) and E_F[PFI] per
/// feature, averaged over independent fresh-data refits.
struct References {
  std::size_t runs = 0;
  std::size_t n_features = 0;
  std::size_t grid_size = 0;
  std::vector<double> pd;      // flattened feature-major: [f * G + g]
  std::vector<double> pd_se;
  std::vector<double> pfi;     // [f]
  std::vector<double> pfi_se;
};

namespace detail {

// Stream tags keep dataset, plan, reference and repetition streams apart
// from per-split streams (split indices stay far below these).
constexpr std::uint64_t kTagData = 1'000'000'001ULL;
constexpr std::uint64_t kTagPlan = 1'000'000'002ULL;
constexpr std::uint64_t kTagRef = 1'000'000'003ULL;
constexpr std::uint64_t kTagRep = 1'000'000'004ULL;
constexpr std::uint64_t kTagFamily = 1'000'000'005ULL;
constexpr std::uint64_t kTagTruth = 1'000'000'006ULL;

inline std::vector<PDGrid> grids_for_all_features(std::size_t p,
                                                  const std::vector<double>&
                                                      grid_points) {
  std::vector<PDGrid> grids;
  grids.reserve(p);
  for (std::size_t f = 0; f < p; ++f)
    grids.push_back(make_grid_from_points(f, grid_points));
  return grids;
}

/// Evaluates one fitted model on its test view: model-PD means for every
/// feature/grid point and marginal model-PFI point estimates per feature.
/// Sampler stream for feature f is derive(split_stream, 1 + f); stream 0 is
/// reserved for the model fit.
inline void eval_model_on_test(const Model& model, const IndexView& test,
                               const std::vector<PDGrid>& grids,
                               std::size_t pfi_l, std::uint64_t split_stream,
                               std::span<double> pd_out,
                               std::span<double> pfi_out) {
  const std::size_t G = grids.empty() ? 0 : grids[0].size();
  std::vector<double> means;
  for (std::size_t f = 0; f < grids.size(); ++f) {
    pd_means(model, test, grids[f], means);
    for (std::size_t g = 0; g < G; ++g) pd_out[f * G + g] = means[g];
  }
  for (std::size_t f = 0; f < pfi_out.size(); ++f) {
    ReplacementSampler sampler;
    sampler.kind = SamplerKind::marginal;
    sampler.l = pfi_l;
    sampler.seed = derive_seed(split_stream, 1 + f);
    const std::vector<double> diffs =
        pfi_loss_diffs(model, test, f, sampler, l2_loss);
    double sum = 0.0;
    for (double v : diffs) sum += v;
    pfi_out[f] = sum / static_cast<double>(diffs.size());
  }
}

/// One fresh run: sample n rows, train on the first 63.2%, evaluate model-PD
/// and model-PFI on the remaining 36.8%.
inline void fresh_run(const DGPSpec& spec, const Learner& learner,
                      std::size_t n, const std::vector<PDGrid>& grids,
                      std::size_t pfi_l, std::uint64_t stream,
                      std::span<double> pd_out, std::span<double> pfi_out) {
  const Dataset data = sample_dgp(spec, n, derive_seed(stream, kTagData));
  const std::size_t k =
      static_cast<std::size_t>(0.632 * static_cast<double>(n));
  std::vector<std::size_t> train_idx(k), test_idx(n - k);
  for (std::size_t i = 0; i < k; ++i) train_idx[i] = i;
  for (std::size_t i = k; i < n; ++i) test_idx[i - k] = i;
  const IndexView train = view(data, std::move(train_idx));
  const IndexView test = view(data, std::move(test_idx));
  const ModelPtr model = learner.fit(train, derive_seed(stream, 0));
  eval_model_on_test(*model, test, grids, pfi_l, stream, pd_out, pfi_out);
}

struct FreshRuns {
  std::vector<std::vector<double>> pd;   // runs x (p * G)
  std::vector<std::vector<double>> pfi;  // runs x p
};

inline FreshRuns fresh_runs(const DGPSpec& spec, const Learner& learner,
                            std::size_t n, const std::vector<double>& grid,
                            std::size_t pfi_l, std::size_t runs,
                            std::uint64_t seed, unsigned threads) {
  const std::size_t p = spec.p;
  const std::size_t G = grid.size();
  const std::vector<PDGrid> grids = grids_for_all_features(p, grid);
  FreshRuns out;
  out.pd.assign(runs, std::vector<double>(p * G));
  out.pfi.assign(runs, std::vector<double>(p));
  parallel_for(runs, threads, [&](std::size_t r) {
    fresh_run(spec, learner, n, grids, pfi_l, derive_seed(seed, kTagRef, r),
              out.pd[r], out.pfi[r]);
  });
  return out;
}

inline void mean_and_se(const std::vector<std::vector<double>>& rows,
                        std::vector<double>& mean, std::vector<double>& se) {
  const std::size_t runs = rows.size();
  const std::size_t cols = rows.empty() ? 0 : rows[0].size();
  mean.assign(cols, 0.0);
  se.assign(cols, 0.0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < cols; ++c) mean[c] += row[c];
  for (std::size_t c = 0; c < cols; ++c)
    mean[c] /= static_cast<double>(runs);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = row[c] - mean[c];
      se[c] += d * d;
    }
  for (std::size_t c = 0; c < cols; ++c)
    se[c] = runs > 1 ? std::sqrt(se[c] / static_cast<double>(runs - 1) /
                                 static_cast<double>(runs))
                     : 0.0;
}

}  // namespace detail

/// Average model-PD / model-PFI over `reference_runs` independent fresh-data
/// fits (63.2% train / 36.8% evaluate), with standard errors.
inline References reference_expectations(const CoverageConfig& cfg) {
  cfg.validate();
  const Learner learner = cfg.learner.make();
  const detail::FreshRuns runs =
      detail::fresh_runs(cfg.dgp, learner, cfg.n, cfg.grid, cfg.pfi_l,
                         cfg.reference_runs, cfg.seed, cfg.threads);
  References refs;
  refs.runs = cfg.reference_runs;
  refs.n_features = cfg.dgp.p;
  refs.grid_size = cfg.grid.size();
  detail::mean_and_se(runs.pd, refs.pd, refs.pd_se);
  detail::mean_and_se(runs.pfi, refs.pfi, refs.pfi_se);
  return refs;
}

/// Coverage and width aggregates for one corrected-flag variant of a cell.
struct CellVariant {
  bool corrected = false;
  double pd_coverage = 0.0;
  double pd_coverage_se = 0.0;
  double pd_mean_width = 0.0;
  double pfi_coverage = 0.0;
  double pfi_coverage_se = 0.0;
  double pfi_mean_width = 0.0;
  std::vector<double> pd_coverage_by_target;   // [f * G + g]
  std::vector<double> pfi_coverage_by_feature; // [f]
};

struct CoverageOutcome {
  CellVariant corrected;
  CellVariant uncorrected;
  std::size_t failed_repetitions = 0;
  bool invalid = false;  // more than 1% of repetitions failed
};

struct CoverageReport {
  CoverageConfig config;
  References references;
  CoverageOutcome outcome;

  const CellVariant& selected() const {
    return config.corrected ? outcome.corrected : outcome.uncorrected;
  }
};

namespace detail {

struct RepRecord {
  bool valid = false;
  double c = 0.0;  // plan correction constant of this repetition
  std::vector<double> pd_mean, pd_s2;   // per target [f * G + g]
  std::vector<double> pfi_mean, pfi_s2; // per feature
};

/// Runs one repetition: m refits (fresh data per refit, or one dataset plus a
/// resample plan), reduced to per-target mean and unbiased variance of the m
/// per-split values.
inline RepRecord run_repetition(const CoverageConfig& cfg,
                                const Learner& learner,
                                const std::vector<PDGrid>& grids,
                                std::uint64_t rep_stream) {
  const std::size_t p = cfg.dgp.p;
  const std::size_t G = cfg.grid.size();
  const std::size_t m = cfg.m;
  std::vector<std::vector<double>> pd_split(m, std::vector<double>(p * G));
  std::vector<std::vector<double>> pfi_split(m, std::vector<double>(p));

  RepRecord rec;
  if (cfg.resampling == ResampleMode::fresh) {
    rec.c = 0.0;
    for (std::size_t d = 0; d < m; ++d) {
      const std::uint64_t sd = derive_seed(rep_stream, d);
      fresh_run(cfg.dgp, learner, cfg.n, grids, cfg.pfi_l, sd, pd_split[d],
                pfi_split[d]);
    }
  } else {
    const Dataset data =
        sample_dgp(cfg.dgp, cfg.n, derive_seed(rep_stream, kTagData));
    const ResamplePlan plan =
        cfg.resampling == ResampleMode::bootstrap
            ? bootstrap_plan(cfg.n, m, derive_seed(rep_stream, kTagPlan))
            : subsample_plan(cfg.n, m, 0.632,
                             derive_seed(rep_stream, kTagPlan));
    rec.c = correction_constant(plan);
    for (std::size_t d = 0; d < m; ++d) {
      const std::uint64_t sd = derive_seed(rep_stream, d);
      const IndexView train = view(data, plan.splits[d].train);
      const IndexView test = view(data, plan.splits[d].test);
      const ModelPtr model = learner.fit(train, derive_seed(sd, 0));
      eval_model_on_test(*model, test, grids, cfg.pfi_l, sd, pd_split[d],
                         pfi_split[d]);
    }
  }

  auto reduce = [m](const std::vector<std::vector<double>>& split_values,
                    std::vector<double>& mean, std::vector<double>& s2) {
    const std::size_t cols = split_values[0].size();
    mean.assign(cols, 0.0);
    s2.assign(cols, 0.0);
    for (std::size_t d = 0; d < m; ++d)
      for (std::size_t cidx = 0; cidx < cols; ++cidx)
        mean[cidx] += split_values[d][cidx];
    for (std::size_t cidx = 0; cidx < cols; ++cidx)
      mean[cidx] /= static_cast<double>(m);
    for (std::size_t d = 0; d < m; ++d)
      for (std::size_t cidx = 0; cidx < cols; ++cidx) {
        const double dev = split_values[d][cidx] - mean[cidx];
        s2[cidx] += dev * dev;
      }
    for (std::size_t cidx = 0; cidx < cols; ++cidx)
      s2[cidx] /= static_cast<double>(m - 1);
  };
  reduce(pd_split, rec.pd_mean, rec.pd_s2);
  reduce(pfi_split, rec.pfi_mean, rec.pfi_s2);
  rec.valid = true;
  return rec;
}

inline CellVariant summarize_variant(
    bool corrected, const CoverageConfig& cfg,
    const std::vector<RepRecord>& records, const References& refs,
    double t_factor) {
  const std::size_t p = cfg.dgp.p;
  const std::size_t G = cfg.grid.size();
  const double inv_m = 1.0 / static_cast<double>(cfg.m);

  CellVariant out;
  out.corrected = corrected;
  out.pd_coverage_by_target.assign(p * G, 0.0);
  out.pfi_coverage_by_feature.assign(p, 0.0);

  std::size_t valid = 0;
  double pd_frac_sum = 0.0, pd_frac_sumsq = 0.0;
  double pfi_frac_sum = 0.0, pfi_frac_sumsq = 0.0;
  double pd_width_sum = 0.0, pfi_width_sum = 0.0;

  for (const RepRecord& rec : records) {
    if (!rec.valid) continue;
    ++valid;
    const double c = corrected ? rec.c : 0.0;
    std::size_t pd_hits = 0;
    for (std::size_t t = 0; t < p * G; ++t) {
      const double half =
          t_factor * std::sqrt((inv_m + c) * rec.pd_s2[t]);
      const bool hit = std::fabs(rec.pd_mean[t] - refs.pd[t]) <= half;
      pd_hits += hit;
      out.pd_coverage_by_target[t] += hit;
      pd_width_sum += 2.0 * half;
    }
    std::size_t pfi_hits = 0;
    for (std::size_t f = 0; f < p; ++f) {
      const double half =
          t_factor * std::sqrt((inv_m + c) * rec.pfi_s2[f]);
      const bool hit = std::fabs(rec.pfi_mean[f] - refs.pfi[f]) <= half;
      pfi_hits += hit;
      out.pfi_coverage_by_feature[f] += hit;
      pfi_width_sum += 2.0 * half;
    }
    const double pd_frac = static_cast<double>(pd_hits) /
                           static_cast<double>(p * G);
    const double pfi_frac = static_cast<double>(pfi_hits) /
                            static_cast<double>(p);
    pd_frac_sum += pd_frac;
    pd_frac_sumsq += pd_frac * pd_frac;
    pfi_frac_sum += pfi_frac;
    pfi_frac_sumsq += pfi_frac * pfi_frac;
  }

  if (valid == 0) return out;
  const double dn = static_cast<double>(valid);
  for (double& v : out.pd_coverage_by_target) v /= dn;
  for (double& v : out.pfi_coverage_by_feature) v /= dn;
  out.pd_coverage = pd_frac_sum / dn;
  out.pfi_coverage = pfi_frac_sum / dn;
  out.pd_mean_width = pd_width_sum / (dn * static_cast<double>(p * G));
  out.pfi_mean_width = pfi_width_sum / (dn * static_cast<double>(p));
  if (valid > 1) {
    const double pd_var =
        (pd_frac_sumsq - dn * out.pd_coverage * out.pd_coverage) / (dn - 1.0);
    const double pfi_var =
        (pfi_frac_sumsq - dn * out.pfi_coverage * out.pfi_coverage) /
        (dn - 1.0);
    out.pd_coverage_se = std::sqrt(std::max(0.0, pd_var) / dn);
    out.pfi_coverage_se = std::sqrt(std::max(0.0, pfi_var) / dn);
  }
  return out;
}

}  // namespace detail

/// Runs the coverage experiment of one cell: `repetitions` independent
/// experiments, each building learner-PD/PFI intervals from m refits and
/// checking whether they contain the reference expectations. Both the
/// corrected and uncorrected variants are evaluated from the same refits.
/// Failed repetitions are recorded and excluded; a cell with more than 1%
/// failures is flagged invalid.
inline CoverageReport coverage_experiment(const CoverageConfig& cfg,
                                          const References* precomputed =
                                              nullptr) {
  cfg.validate();
  const Learner learner = cfg.learner.make();
  const std::vector<PDGrid> grids =
      detail::grids_for_all_features(cfg.dgp.p, cfg.grid);

  CoverageReport report;
  report.config = cfg;
  report.references = precomputed ? *precomputed : reference_expectations(cfg);

  std::vector<detail::RepRecord> records(cfg.repetitions);
  parallel_for(cfg.repetitions, cfg.threads, [&](std::size_t rep) {
    const std::uint64_t rep_stream =
        derive_seed(cfg.seed, detail::kTagRep, rep);
    try {
      records[rep] = detail::run_repetition(cfg, learner, grids, rep_stream);
    } catch (const std::exception&) {
      records[rep].valid = false;
    }
  });

  const double t_factor = t_quantile(1.0 - cfg.alpha / 2.0, cfg.m - 1);
  report.outcome.corrected = detail::summarize_variant(
      true, cfg, records, report.references, t_factor);
  report.outcome.uncorrected = detail::summarize_variant(
      false, cfg, records, report.references, t_factor);
  for (const auto& rec : records)
    if (!rec.valid) ++report.outcome.failed_repetitions;
  report.outcome.invalid =
      100 * report.outcome.failed_repetitions > cfg.repetitions;
  return report;
}

/// Re-runs the coverage experiment for each m in `m_values`, reusing the
/// references (which do not depend on m).
inline std::vector<CoverageReport> refit_sweep(
    CoverageConfig cfg, std::span<const std::size_t> m_values) {
  for (std::size_t m : m_values)
    if (m < 2) throw Error(ErrorKind::InvalidSize, "every m must be >= 2");
  const References refs = reference_expectations(cfg);
  std::vector<CoverageReport> reports;
  reports.reserve(m_values.size());
  for (std::size_t m : m_values) {
    cfg.m = m;
    reports.push_back(coverage_experiment(cfg, &refs));
  }
  return reports;
}

/// Per-grid-point decomposition of the model-PD estimation error against the
/// DGP-PD over fresh refits: mse ~= bias^2 + variance.
struct MsePoint {
  double truth = 0.0;
  double mean = 0.0;
  double se_mean = 0.0;
  double bias_sq = 0.0;
  double variance = 0.0;  // unbiased across-fit variance
  double mse = 0.0;
  double se_mse = 0.0;
};

namespace detail {

inline MsePoint mse_point(std::span<const double> values, double truth) {
  const std::size_t runs = values.size();
  MsePoint pt;
  pt.truth = truth;
  double sum = 0.0;
  for (double v : values) sum += v;
  pt.mean = sum / static_cast<double>(runs);
  double ss = 0.0, mse_sum = 0.0, mse_sumsq = 0.0;
  for (double v : values) {
    const double dev = v - pt.mean;
    ss += dev * dev;
    const double err = (v - truth) * (v - truth);
    mse_sum += err;
    mse_sumsq += err * err;
  }
  pt.variance = ss / static_cast<double>(runs - 1);
  pt.se_mean = std::sqrt(pt.variance / static_cast<double>(runs));
  pt.bias_sq = (pt.mean - truth) * (pt.mean - truth);
  pt.mse = mse_sum / static_cast<double>(runs);
  const double mse_var =
      (mse_sumsq - static_cast<double>(runs) * pt.mse * pt.mse) /
      static_cast<double>(runs - 1);
  pt.se_mse = std::sqrt(std::max(0.0, mse_var) / static_cast<double>(runs));
  return pt;
}

}  // namespace detail

/// MSE / bias^2 / variance of model-PD against DGP-PD per (feature, grid
/// point), estimated over cfg.reference_runs fresh refits.
inline std::vector<std::vector<MsePoint>> pd_mse_decomposition(
    const CoverageConfig& cfg) {
  cfg.validate();
  const Learner learner = cfg.learner.make();
  const detail::FreshRuns runs =
      detail::fresh_runs(cfg.dgp, learner, cfg.n, cfg.grid, cfg.pfi_l,
                         cfg.reference_runs, cfg.seed, cfg.threads);
  const std::size_t p = cfg.dgp.p;
  const std::size_t G = cfg.grid.size();
  std::vector<std::vector<MsePoint>> out(p, std::vector<MsePoint>(G));
  std::vector<double> values(cfg.reference_runs);
  for (std::size_t f = 0; f < p; ++f) {
    const std::vector<OracleValue> truth =
        dgp_pd(cfg.dgp, f, cfg.grid, 200000,
               derive_seed(cfg.seed, detail::kTagTruth, f));
    for (std::size_t g = 0; g < G; ++g) {
      for (std::size_t r = 0; r < cfg.reference_runs; ++r)
        values[r] = runs.pd[r][f * G + g];
      out[f][g] = detail::mse_point(values, truth[g].value);
    }
  }
  return out;
}

/// Scalar analogue for model-PFI against DGP-PFI per feature.
inline std::vector<MsePoint> pfi_mse_decomposition(const CoverageConfig& cfg) {
  cfg.validate();
  const Learner learner = cfg.learner.make();
  const detail::FreshRuns runs =
      detail::fresh_runs(cfg.dgp, learner, cfg.n, cfg.grid, cfg.pfi_l,
                         cfg.reference_runs, cfg.seed, cfg.threads);
  const std::size_t p = cfg.dgp.p;
  std::vector<MsePoint> out(p);
  std::vector<double> values(cfg.reference_runs);
  for (std::size_t f = 0; f < p; ++f) {
    const OracleValue truth =
        dgp_pfi(cfg.dgp, f, 200000, derive_seed(cfg.seed, detail::kTagTruth, f));
    for (std::size_t r = 0; r < cfg.reference_runs; ++r)
      values[r] = runs.pfi[r][f];
    out[f] = detail::mse_point(values, truth.value);
  }
  return out;
}

/// The three terms of the marginal-PFI bias under squared loss, with the
/// model family standing in for the distribution of fitted models:
///   permutation_loss_bias - model_bias_sq + variance_inflation
///     ~= E_F[PFI of the model] - DGP-PFI.
struct PfiBiasTerms {
  double permutation_loss_bias = 0.0;
  double model_bias_sq = 0.0;
  double variance_inflation = 0.0;
  double se_permutation_loss_bias = 0.0;
  double se_model_bias_sq = 0.0;
  double se_variance_inflation = 0.0;
  double se_total = 0.0;

  double total() const {
    return permutation_loss_bias - model_bias_sq + variance_inflation;
  }
};

/// Monte Carlo estimate of the PFI bias terms for a family of models treated
/// as realizations of F. Family means/variances use the population
/// convention (the family IS the distribution).
inline PfiBiasTerms pfi_bias_decomposition(const DGPSpec& spec,
                                           std::span<const ModelPtr> family,
                                           std::size_t feature,
                                           std::size_t mc_n,
                                           std::uint64_t seed) {
  if (family.empty())
    throw Error(ErrorKind::InvalidSize, "model family must be non-empty");
  if (feature >= spec.p)
    throw Error(ErrorKind::IndexOutOfBounds, "feature index out of range");
  if (mc_n < 2) throw Error(ErrorKind::InvalidSize, "mc_n must be >= 2");

  Rng rng(seed);
  Matrix x(mc_n, spec.p), x_perm(mc_n, spec.p);
  std::vector<double> f_orig(mc_n), f_perm(mc_n);
  for (std::size_t i = 0; i < mc_n; ++i) {
    for (std::size_t c = 0; c < spec.p; ++c) x(i, c) = rng.uniform01();
    const auto row = x.row(i);
    f_orig[i] = spec.f(row);
    for (std::size_t c = 0; c < spec.p; ++c) x_perm(i, c) = x(i, c);
    x_perm(i, feature) = rng.uniform01();
    f_perm[i] = spec.f(x_perm.row(i));
  }

  // Per-row mean and population variance of family predictions (Welford).
  std::vector<double> mean_o(mc_n, 0.0), m2_o(mc_n, 0.0);
  std::vector<double> mean_p(mc_n, 0.0), m2_p(mc_n, 0.0);
  std::vector<double> pred(mc_n);
  std::size_t count = 0;
  for (const ModelPtr& model : family) {
    ++count;
    model->predict_into(x, pred);
    for (std::size_t i = 0; i < mc_n; ++i) {
      const double d = pred[i] - mean_o[i];
      mean_o[i] += d / static_cast<double>(count);
      m2_o[i] += d * (pred[i] - mean_o[i]);
    }
    model->predict_into(x_perm, pred);
    for (std::size_t i = 0; i < mc_n; ++i) {
      const double d = pred[i] - mean_p[i];
      mean_p[i] += d / static_cast<double>(count);
      m2_p[i] += d * (pred[i] - mean_p[i]);
    }
  }
  const double inv_count = 1.0 / static_cast<double>(count);

  auto accumulate = [mc_n](auto&& term_fn, double& mean, double& se) {
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < mc_n; ++i) {
      const double v = term_fn(i);
      sum += v;
      sumsq += v * v;
    }
    mean = sum / static_cast<double>(mc_n);
    const double var =
        (sumsq - static_cast<double>(mc_n) * mean * mean) /
        static_cast<double>(mc_n - 1);
    se = std::sqrt(std::max(0.0, var) / static_cast<double>(mc_n));
  };

  PfiBiasTerms terms;
  accumulate(
      [&](std::size_t i) {
        const double a = f_orig[i] - mean_p[i];
        const double b = f_orig[i] - f_perm[i];
        return a * a - b * b;
      },
      terms.permutation_loss_bias, terms.se_permutation_loss_bias);
  accumulate(
      [&](std::size_t i) {
        const double a = f_orig[i] - mean_o[i];
        return a * a;
      },
      terms.model_bias_sq, terms.se_model_bias_sq);
  accumulate(
      [&](std::size_t i) { return (m2_p[i] - m2_o[i]) * inv_count; },
      terms.variance_inflation, terms.se_variance_inflation);
  double total_mean = 0.0;
  accumulate(
      [&](std::size_t i) {
        const double a = f_orig[i] - mean_p[i];
        const double b = f_orig[i] - f_perm[i];
        const double mb = f_orig[i] - mean_o[i];
        return a * a - b * b - mb * mb + (m2_p[i] - m2_o[i]) * inv_count;
      },
      total_mean, terms.se_total);
  return terms;
}

/// Model family from refits on independent fresh datasets (each dataset is
/// used whole as the training set).
inline std::vector<ModelPtr> fit_fresh_family(const DGPSpec& spec,
                                              const Learner& learner,
                                              std::size_t n, std::size_t count,
                                              std::uint64_t seed,
                                              unsigned threads = 1) {
  std::vector<ModelPtr> family(count);
  parallel_for(count, threads, [&](std::size_t q) {
    const std::uint64_t stream = derive_seed(seed, detail::kTagFamily, q);
    const Dataset data =
        sample_dgp(spec, n, derive_seed(stream, detail::kTagData));
    family[q] = learner.fit(full_view(data), derive_seed(stream, 0));
  });
  return family;
}

}  // namespace pdpfi
