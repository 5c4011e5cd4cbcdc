#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdpfi/coverage.hpp"
#include "pdpfi/serialize.hpp"

namespace pdpfi {

/// One line of coverage.csv, mirroring the structure of the simulation
/// tables: a cell is (dgp, model, n, mode) x corrected x target.
struct SimulationRow {
  std::string dgp;
  std::string model;
  std::size_t n = 0;
  std::string mode;
  bool corrected = false;
  std::string target;  // "pd" | "pfi"
  double coverage = 0.0;
  double mean_width = 0.0;
  double coverage_se = 0.0;
  std::size_t failed_repetitions = 0;
  bool invalid = false;
};

inline std::vector<SimulationRow> report_rows(const CoverageReport& report,
                                              bool both_variants) {
  std::vector<SimulationRow> rows;
  auto emit = [&](const CellVariant& var) {
    SimulationRow base;
    base.dgp = report.config.dgp.name;
    base.model = report.config.learner.name;
    base.n = report.config.n;
    base.mode = resample_mode_name(report.config.resampling);
    base.corrected = var.corrected;
    base.failed_repetitions = report.outcome.failed_repetitions;
    base.invalid = report.outcome.invalid;

    SimulationRow pd = base;
    pd.target = "pd";
    pd.coverage = var.pd_coverage;
    pd.mean_width = var.pd_mean_width;
    pd.coverage_se = var.pd_coverage_se;
    rows.push_back(pd);

    SimulationRow pfi = base;
    pfi.target = "pfi";
    pfi.coverage = var.pfi_coverage;
    pfi.mean_width = var.pfi_mean_width;
    pfi.coverage_se = var.pfi_coverage_se;
    rows.push_back(pfi);
  };
  if (both_variants) {
    emit(report.outcome.uncorrected);
    emit(report.outcome.corrected);
  } else {
    emit(report.selected());
  }
  return rows;
}

inline void rows_to_csv(std::span<const SimulationRow> rows,
                        std::ostream& out) {
  out << "dgp,model,n,mode,corrected,target,coverage,mean_width\n";
  for (const SimulationRow& r : rows)
    out << r.dgp << ',' << r.model << ',' << r.n << ',' << r.mode << ','
        << (r.corrected ? 1 : 0) << ',' << r.target << ','
        << format_double(r.coverage) << ',' << format_double(r.mean_width)
        << '\n';
}

inline nlohmann::ordered_json rows_to_json(std::span<const SimulationRow> rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const SimulationRow& r : rows)
    arr.push_back({{"dgp", r.dgp},
                   {"model", r.model},
                   {"n", r.n},
                   {"mode", r.mode},
                   {"corrected", r.corrected},
                   {"target", r.target},
                   {"coverage", r.coverage},
                   {"mean_width", r.mean_width},
                   {"coverage_se", r.coverage_se},
                   {"failed_repetitions", r.failed_repetitions},
                   {"invalid", r.invalid}});
  return arr;
}

inline nlohmann::ordered_json references_to_json(const References& refs) {
  nlohmann::ordered_json j;
  j["runs"] = refs.runs;
  j["n_features"] = refs.n_features;
  j["grid_size"] = refs.grid_size;
  j["pd"] = refs.pd;
  j["pd_se"] = refs.pd_se;
  j["pfi"] = refs.pfi;
  j["pfi_se"] = refs.pfi_se;
  return j;
}

/// Desk-scale settings for the bundled experiment grids.
struct SimulationOptions {
  std::size_t repetitions = 1000;
  std::size_t reference_runs = 2000;
  std::size_t m = 15;
  std::size_t rf_trees = 100;
  std::size_t pfi_l = 5;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::vector<std::size_t> ns = {100, 1000};
};

namespace detail {

inline LearnerSpec preset_learner(const std::string& name,
                                  std::size_t rf_trees) {
  LearnerSpec spec;
  spec.name = name;
  spec.tree = TreeParams{30, 5};
  spec.forest.tree = spec.tree;
  spec.forest.n_trees = rf_trees;
  spec.forest.features_per_split = 0;
  spec.forest.bootstrap_rows = true;
  return spec;
}

}  // namespace detail

/// The full real-world grid of the simulation tables: 2 DGPs x 3 learners x
/// ns x {bootstrap, subsample}, each cell carrying both the corrected and the
/// uncorrected variant. References are shared between the two modes of a
/// (dgp, learner, n) group, as are the per-repetition datasets.
inline std::vector<CoverageReport> run_tables12(const SimulationOptions& opt) {
  std::vector<CoverageReport> reports;
  const std::vector<std::string> dgps = {"linear", "nonlinear"};
  const std::vector<std::string> learners = {"lm", "rf", "tree"};
  std::uint64_t group = 0;
  for (const std::string& dgp_name : dgps) {
    for (const std::string& learner_name : learners) {
      for (std::size_t n : opt.ns) {
        CoverageConfig cfg;
        cfg.dgp = dgp_by_name(dgp_name);
        cfg.learner = detail::preset_learner(learner_name, opt.rf_trees);
        cfg.n = n;
        cfg.m = opt.m;
        cfg.alpha = opt.alpha;
        cfg.repetitions = opt.repetitions;
        cfg.reference_runs = opt.reference_runs;
        cfg.seed = derive_seed(opt.seed, group++);
        cfg.pfi_l = opt.pfi_l;
        cfg.threads = opt.threads;
        const References refs = reference_expectations(cfg);
        for (ResampleMode mode :
             {ResampleMode::bootstrap, ResampleMode::subsample}) {
          cfg.resampling = mode;
          reports.push_back(coverage_experiment(cfg, &refs));
        }
      }
    }
  }
  return reports;
}

/// The ideal-setting cells (fresh data per refit, c = 0) for lm and rf on
/// both DGPs.
inline std::vector<CoverageReport> run_ideal_grid(const SimulationOptions& opt,
                                                  std::size_t n) {
  std::vector<CoverageReport> reports;
  std::uint64_t group = 1000;
  for (const std::string& dgp_name : {std::string("linear"),
                                      std::string("nonlinear")}) {
    for (const std::string& learner_name : {std::string("lm"),
                                            std::string("rf")}) {
      CoverageConfig cfg;
      cfg.dgp = dgp_by_name(dgp_name);
      cfg.learner = detail::preset_learner(learner_name, opt.rf_trees);
      cfg.n = n;
      cfg.m = opt.m;
      cfg.resampling = ResampleMode::fresh;
      cfg.corrected = false;  // c = 0 either way in fresh mode
      cfg.alpha = opt.alpha;
      cfg.repetitions = opt.repetitions;
      cfg.reference_runs = opt.reference_runs;
      cfg.seed = derive_seed(opt.seed, group++);
      cfg.pfi_l = opt.pfi_l;
      cfg.threads = opt.threads;
      reports.push_back(coverage_experiment(cfg));
    }
  }
  return reports;
}

/// Named single-cell presets for the CLI.
inline CoverageConfig preset_config(const std::string& name,
                                    const SimulationOptions& opt) {
  CoverageConfig cfg;
  cfg.m = opt.m;
  cfg.alpha = opt.alpha;
  cfg.repetitions = opt.repetitions;
  cfg.reference_runs = opt.reference_runs;
  cfg.seed = opt.seed;
  cfg.pfi_l = opt.pfi_l;
  cfg.threads = opt.threads;
  if (name == "ideal-lm-linear") {
    cfg.dgp = linear_dgp();
    cfg.learner = detail::preset_learner("lm", opt.rf_trees);
    cfg.resampling = ResampleMode::fresh;
    cfg.corrected = false;
    return cfg;
  }
  if (name == "ideal-rf-linear") {
    cfg.dgp = linear_dgp();
    cfg.learner = detail::preset_learner("rf", opt.rf_trees);
    cfg.resampling = ResampleMode::fresh;
    cfg.corrected = false;
    return cfg;
  }
  if (name == "boot-lm-linear") {
    cfg.dgp = linear_dgp();
    cfg.learner = detail::preset_learner("lm", opt.rf_trees);
    cfg.resampling = ResampleMode::bootstrap;
    cfg.corrected = true;
    return cfg;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown preset: " + name);
}

}  // namespace pdpfi
