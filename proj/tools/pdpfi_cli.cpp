// Command-line front end: analyze real CSV datasets (PD / PFI with
// confidence intervals), run coverage simulations, and compare learner
// performance with the corrected t-interval.
//
// Exit codes: 0 success, 2 input/validation error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdpfi/pdpfi.hpp"

namespace fs = std::filesystem;
using namespace pdpfi;

namespace {

constexpr const char* kVersion = "0.1.0";

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::DegenerateDesign:
      return 3;
    default:
      return 2;
  }
}

std::uint64_t effective_seed(std::uint64_t flag_seed) {
  if (const char* env = std::getenv("PDPFI_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return flag_seed;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << content;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : csv) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct AnalyzeRequest {
  std::string data_path;
  std::string target;
  std::string learner = "rf";
  std::size_t max_depth = 30;
  std::size_t min_leaf = 5;
  std::size_t trees = 100;
  std::size_t mtry = 0;
  bool no_bootstrap_rows = false;
  std::string resampling = "bootstrap";
  std::size_t m = 15;
  double subsample_fraction = 0.632;
  double alpha = 0.05;
  std::string features;  // comma list; empty = all
  std::string grid_kind = "equidistant";
  std::size_t grid_size = 20;
  std::string sampler = "marginal";
  std::size_t l = 0;  // 0 = sampler-specific default
  std::size_t bins = 10;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::string format = "csv";
  unsigned threads = 0;
};

LearnerSpec learner_spec_from(const AnalyzeRequest& req) {
  LearnerSpec spec;
  spec.name = req.learner;
  spec.tree = TreeParams{req.max_depth, req.min_leaf};
  spec.forest.tree = spec.tree;
  spec.forest.n_trees = req.trees;
  spec.forest.features_per_split = req.mtry;
  spec.forest.bootstrap_rows = !req.no_bootstrap_rows;
  if (spec.name != "lm" && spec.name != "tree" && spec.name != "rf")
    throw Error(ErrorKind::InvalidArgument, "unknown learner: " + spec.name);
  return spec;
}

ResamplePlan build_plan(const std::string& mode, std::size_t n, std::size_t m,
                        double fraction, std::uint64_t plan_seed) {
  if (mode == "bootstrap") return bootstrap_plan(n, m, plan_seed);
  if (mode == "subsample") return subsample_plan(n, m, fraction, plan_seed);
  throw Error(ErrorKind::InvalidArgument, "unknown resampling: " + mode);
}

void validate_common(double alpha, std::size_t m) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorKind::InvalidProbability, "--alpha must be in (0,1)");
  if (m < 2 || m > 1000)
    throw Error(ErrorKind::InvalidSize, "--m must be in [2, 1000]");
}

int run_analyze(const AnalyzeRequest& req) {
  validate_common(req.alpha, req.m);
  if (req.format != "csv" && req.format != "json")
    throw Error(ErrorKind::InvalidArgument, "--format must be csv or json");
  if (req.grid_kind != "equidistant" && req.grid_kind != "quantile")
    throw Error(ErrorKind::InvalidArgument,
                "--grid-kind must be equidistant or quantile");
  const LearnerSpec learner_spec = learner_spec_from(req);
  const std::uint64_t seed = effective_seed(req.seed);

  const Dataset data = load_csv(req.data_path, req.target);

  std::vector<std::size_t> features;
  if (req.features.empty()) {
    for (std::size_t f = 0; f < data.n_features(); ++f) features.push_back(f);
  } else {
    for (const std::string& name : split_list(req.features))
      features.push_back(data.feature_index(name));
  }

  const std::uint64_t plan_seed = derive_seed(seed, 1);
  const std::uint64_t fit_seed = derive_seed(seed, 2);
  const std::uint64_t sampler_seed = derive_seed(seed, 3);
  const ResamplePlan plan = build_plan(req.resampling, data.n_rows(), req.m,
                                       req.subsample_fraction, plan_seed);
  const Learner learner = learner_spec.make();
  const PlanFits fits =
      fit_plan_models(learner, data, plan, fit_seed, req.threads);

  fs::create_directories(req.out_dir);
  const fs::path out_dir(req.out_dir);

  // Per-feature PD curves. Constant columns cannot host a multi-point grid;
  // they are skipped here but still ranked by PFI below.
  std::vector<std::string> pd_written;
  for (std::size_t f : features) {
    PDGrid grid;
    try {
      grid = make_grid(data, f, req.grid_size,
                       req.grid_kind == "quantile" ? GridKind::quantile
                                                   : GridKind::equidistant);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ConstantFeature) {
        std::cerr << "note: skipping PD for constant feature '"
                  << data.feature_names()[f] << "'\n";
        continue;
      }
      throw;
    }
    const PDCurve curve = learner_pd(fits, grid, req.alpha);
    const std::string& name = data.feature_names()[f];
    if (req.format == "csv") {
      std::ostringstream os;
      pd_to_csv(curve, name, os);
      write_text(out_dir / ("pd_" + name + ".csv"), os.str());
    } else {
      write_text(out_dir / ("pd_" + name + ".json"),
                 pd_to_json(curve, name).dump(2) + "\n");
    }
    pd_written.push_back(name);
  }

  ReplacementSampler sampler;
  sampler.kind = req.sampler == "conditional" ? SamplerKind::conditional_binned
                                              : SamplerKind::marginal;
  if (req.sampler != "marginal" && req.sampler != "conditional")
    throw Error(ErrorKind::InvalidArgument,
                "--sampler must be marginal or conditional");
  // Defaults: l = 5 for marginal, 1 for conditional; --l overrides either.
  sampler.l = req.l != 0
                  ? req.l
                  : (sampler.kind == SamplerKind::marginal ? 5 : 1);
  sampler.bins = req.bins;

  std::vector<PFIEstimate> estimates;
  for (std::size_t f : features) {
    ReplacementSampler feature_sampler = sampler;
    feature_sampler.seed = derive_seed(sampler_seed, f);
    estimates.push_back(learner_pfi(fits, f, feature_sampler, req.alpha));
  }
  const std::vector<RankedPFI> ranked = pfi_ranking(std::move(estimates));
  if (req.format == "csv") {
    std::ostringstream os;
    pfi_table_to_csv(ranked, data.feature_names(), os);
    write_text(out_dir / "pfi.csv", os.str());
  } else {
    write_text(out_dir / "pfi.json",
               pfi_to_json(ranked, data.feature_names()).dump(2) + "\n");
  }

  nlohmann::ordered_json meta;
  meta["version"] = kVersion;
  meta["command"] = "analyze";
  meta["data"] = req.data_path;
  meta["target"] = req.target;
  meta["learner"] = learner_spec_to_json(learner_spec);
  meta["resampling"] = req.resampling;
  meta["m"] = req.m;
  meta["subsample_fraction"] = req.subsample_fraction;
  meta["alpha"] = req.alpha;
  meta["grid_kind"] = req.grid_kind;
  meta["grid_size"] = req.grid_size;
  meta["sampler"] = sampler.describe();
  meta["seed"] = seed;
  meta["seeds"] = {{"plan", plan_seed},
                   {"fits", fit_seed},
                   {"sampler", sampler_seed}};
  meta["c"] = fits.c;
  meta["format"] = req.format;
  meta["pd_features"] = pd_written;
  meta["plan"] = plan_to_json(plan);
  write_text(out_dir / "run_meta.json", meta.dump(2) + "\n");
  return 0;
}

struct SimulateRequest {
  std::string config_path;
  std::string preset;
  std::string out_dir = ".";
  std::optional<std::size_t> repetitions;
  std::optional<std::size_t> reference_runs;
  std::size_t rf_trees = 100;
  std::size_t m = 15;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string sweep_m;  // comma list; runs a refit sweep on the config
};

int run_simulate(const SimulateRequest& req) {
  if (req.config_path.empty() == req.preset.empty())
    throw Error(ErrorKind::InvalidArgument,
                "exactly one of --config or --preset is required");

  SimulationOptions opt;
  opt.rf_trees = req.rf_trees;
  opt.m = req.m;
  opt.seed = effective_seed(req.seed);
  opt.threads = req.threads;
  if (req.repetitions) opt.repetitions = *req.repetitions;
  if (req.reference_runs) opt.reference_runs = *req.reference_runs;

  fs::create_directories(req.out_dir);
  const fs::path out_dir(req.out_dir);

  std::vector<CoverageReport> reports;
  bool both_variants = false;
  std::string label;
  if (!req.preset.empty()) {
    label = req.preset;
    if (req.preset == "tables12") {
      reports = run_tables12(opt);
      both_variants = true;
    } else if (req.preset == "ideal") {
      reports = run_ideal_grid(opt, 100);
    } else {
      CoverageConfig cfg = preset_config(req.preset, opt);
      reports.push_back(coverage_experiment(cfg));
    }
  } else {
    label = req.config_path;
    std::ifstream in(req.config_path);
    if (!in)
      throw Error(ErrorKind::IoError, "cannot open " + req.config_path);
    nlohmann::json j = nlohmann::json::parse(in);
    CoverageConfig cfg = coverage_config_from_json(j);
    if (req.repetitions) cfg.repetitions = *req.repetitions;
    if (req.reference_runs) cfg.reference_runs = *req.reference_runs;
    cfg.threads = req.threads;
    if (!req.sweep_m.empty()) {
      std::vector<std::size_t> ms;
      for (const std::string& tok : split_list(req.sweep_m))
        ms.push_back(std::stoul(tok));
      const std::vector<CoverageReport> sweep = refit_sweep(cfg, ms);
      std::ostringstream os;
      os << "m,target,corrected,coverage,mean_width\n";
      for (const CoverageReport& rep : sweep)
        for (const SimulationRow& row : report_rows(rep, true))
          os << rep.config.m << ',' << row.target << ','
             << (row.corrected ? 1 : 0) << ',' << format_double(row.coverage)
             << ',' << format_double(row.mean_width) << '\n';
      write_text(out_dir / "refit_sweep.csv", os.str());
    }
    reports.push_back(coverage_experiment(cfg));
  }

  std::vector<SimulationRow> rows;
  for (const CoverageReport& report : reports)
    for (const SimulationRow& row : report_rows(report, both_variants))
      rows.push_back(row);

  std::ostringstream os;
  rows_to_csv(rows, os);
  write_text(out_dir / "coverage.csv", os.str());

  nlohmann::ordered_json meta;
  meta["version"] = kVersion;
  meta["command"] = "simulate";
  meta["source"] = label;
  meta["seed"] = opt.seed;
  meta["rows"] = rows_to_json(rows);
  auto& cells = meta["cells"] = nlohmann::ordered_json::array();
  for (const CoverageReport& report : reports) {
    nlohmann::ordered_json cell;
    cell["config"] = coverage_config_to_json(report.config);
    cell["references"] = references_to_json(report.references);
    cell["failed_repetitions"] = report.outcome.failed_repetitions;
    cell["invalid"] = report.outcome.invalid;
    cells.push_back(std::move(cell));
  }
  write_text(out_dir / "coverage_meta.json", meta.dump(2) + "\n");

  std::size_t failed = 0;
  for (const CoverageReport& report : reports)
    failed += report.outcome.failed_repetitions;
  std::cout << "wrote " << (out_dir / "coverage.csv").string() << " ("
            << rows.size() << " rows, " << failed << " failed repetitions)\n";
  return 0;
}

struct CompareRequest {
  std::string data_path;
  std::string target;
  std::string learner_a = "lm";
  std::string learner_b = "rf";
  std::size_t trees = 100;
  std::size_t max_depth = 30;
  std::size_t min_leaf = 5;
  std::string resampling = "bootstrap";
  std::size_t m = 15;
  double subsample_fraction = 0.632;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::string out_dir;
  unsigned threads = 0;
};

int run_compare(const CompareRequest& req) {
  validate_common(req.alpha, req.m);
  const std::uint64_t seed = effective_seed(req.seed);
  const Dataset data = load_csv(req.data_path, req.target);

  auto spec_for = [&](const std::string& name) {
    AnalyzeRequest tmp;
    tmp.learner = name;
    tmp.trees = req.trees;
    tmp.max_depth = req.max_depth;
    tmp.min_leaf = req.min_leaf;
    return learner_spec_from(tmp);
  };
  const LearnerSpec spec_a = spec_for(req.learner_a);
  const LearnerSpec spec_b = spec_for(req.learner_b);

  const std::uint64_t plan_seed = derive_seed(seed, 1);
  const ResamplePlan plan = build_plan(req.resampling, data.n_rows(), req.m,
                                       req.subsample_fraction, plan_seed);
  const PlanFits fits_a = fit_plan_models(spec_a.make(), data, plan,
                                          derive_seed(seed, 4), req.threads);
  const PlanFits fits_b = fit_plan_models(spec_b.make(), data, plan,
                                          derive_seed(seed, 5), req.threads);
  const auto losses_a = per_split_losses(fits_a);
  const auto losses_b = per_split_losses(fits_b);

  auto mean_mse = [](const std::vector<std::vector<double>>& losses) {
    double total = 0.0;
    for (const auto& split : losses) {
      double sum = 0.0;
      for (double v : split) sum += v;
      total += sum / static_cast<double>(split.size());
    }
    return total / static_cast<double>(losses.size());
  };
  const double mse_a = mean_mse(losses_a);
  const double mse_b = mean_mse(losses_b);
  const IntervalEstimate diff =
      compare_learners(losses_a, losses_b, fits_a.c, req.alpha);

  std::cout << req.learner_a << " mean MSE: " << format_double(mse_a) << "\n"
            << req.learner_b << " mean MSE: " << format_double(mse_b) << "\n"
            << "difference (" << req.learner_a << " - " << req.learner_b
            << "): " << format_double(diff.mean) << "  "
            << static_cast<int>((1.0 - req.alpha) * 100) << "% CI ["
            << format_double(diff.lower) << ", " << format_double(diff.upper)
            << "]\n";

  if (!req.out_dir.empty()) {
    fs::create_directories(req.out_dir);
    nlohmann::ordered_json j;
    j["version"] = kVersion;
    j["command"] = "compare";
    j["data"] = req.data_path;
    j["target"] = req.target;
    j["learner_a"] = req.learner_a;
    j["learner_b"] = req.learner_b;
    j["resampling"] = req.resampling;
    j["m"] = req.m;
    j["alpha"] = req.alpha;
    j["seed"] = seed;
    j["c"] = fits_a.c;
    j["mse_a"] = mse_a;
    j["mse_b"] = mse_b;
    j["difference"] = {{"mean", diff.mean},
                       {"lower", diff.lower},
                       {"upper", diff.upper},
                       {"variance", diff.variance},
                       {"df", diff.df}};
    write_text(fs::path(req.out_dir) / "compare.json", j.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial dependence and permutation importance with "
               "variance estimates and confidence intervals"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  AnalyzeRequest areq;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "PD curves and PFI table with CIs for a CSV dataset");
  analyze->add_option("--data", areq.data_path, "input CSV")->required();
  analyze->add_option("--target", areq.target, "target column")->required();
  analyze->add_option("--learner", areq.learner, "lm | tree | rf");
  analyze->add_option("--max-depth", areq.max_depth, "tree depth limit");
  analyze->add_option("--min-leaf", areq.min_leaf, "min samples per leaf");
  analyze->add_option("--trees", areq.trees, "forest size");
  analyze->add_option("--mtry", areq.mtry,
                      "features per split (0 = ceil(p/3))");
  analyze->add_flag("--no-bootstrap-rows", areq.no_bootstrap_rows,
                    "disable per-tree bootstrap");
  analyze->add_option("--resampling", areq.resampling,
                      "bootstrap | subsample");
  analyze->add_option("--m", areq.m, "number of refits");
  analyze->add_option("--subsample-fraction", areq.subsample_fraction,
                      "train fraction for subsampling");
  analyze->add_option("--alpha", areq.alpha, "1 - confidence level");
  analyze->add_option("--features", areq.features,
                      "comma list of features (default: all)");
  analyze->add_option("--grid-kind", areq.grid_kind,
                      "equidistant | quantile");
  analyze->add_option("--grid-size", areq.grid_size, "grid points");
  analyze->add_option("--sampler", areq.sampler, "marginal | conditional");
  analyze->add_option("--l", areq.l,
                      "replacement repetitions (default 5 marginal, "
                      "1 conditional)");
  analyze->add_option("--bins", areq.bins, "conditional bins");
  analyze->add_option("--seed", areq.seed, "RNG seed (PDPFI_SEED overrides)");
  analyze->add_option("--out", areq.out_dir, "output directory");
  analyze->add_option("--format", areq.format, "csv | json");
  analyze->add_option("--threads", areq.threads, "0 = all cores");

  SimulateRequest sreq;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "coverage experiments against DGP ground truth");
  simulate->add_option("--config", sreq.config_path, "CoverageConfig JSON");
  simulate->add_option("--preset", sreq.preset,
                       "tables12 | ideal | ideal-lm-linear | ideal-rf-linear "
                       "| boot-lm-linear");
  simulate->add_option("--out", sreq.out_dir, "output directory")->required();
  simulate->add_option("--repetitions", sreq.repetitions, "override");
  simulate->add_option("--reference-runs", sreq.reference_runs, "override");
  simulate->add_option("--rf-trees", sreq.rf_trees,
                       "forest size for presets (lower to 50 to speed up)");
  simulate->add_option("--m", sreq.m, "refits per experiment");
  simulate->add_option("--seed", sreq.seed, "RNG seed (PDPFI_SEED overrides)");
  simulate->add_option("--threads", sreq.threads, "0 = all cores");
  simulate->add_option("--sweep-m", sreq.sweep_m,
                       "comma list of m values for a refit sweep (config mode)");

  CompareRequest creq;
  CLI::App* compare = app.add_subcommand(
      "compare", "corrected performance-difference interval of two learners");
  compare->add_option("--data", creq.data_path, "input CSV")->required();
  compare->add_option("--target", creq.target, "target column")->required();
  compare->add_option("--learner-a", creq.learner_a, "lm | tree | rf");
  compare->add_option("--learner-b", creq.learner_b, "lm | tree | rf");
  compare->add_option("--trees", creq.trees, "forest size");
  compare->add_option("--max-depth", creq.max_depth, "tree depth limit");
  compare->add_option("--min-leaf", creq.min_leaf, "min samples per leaf");
  compare->add_option("--resampling", creq.resampling,
                      "bootstrap | subsample");
  compare->add_option("--m", creq.m, "number of refits");
  compare->add_option("--subsample-fraction", creq.subsample_fraction,
                      "train fraction for subsampling");
  compare->add_option("--alpha", creq.alpha, "1 - confidence level");
  compare->add_option("--seed", creq.seed, "RNG seed (PDPFI_SEED overrides)");
  compare->add_option("--out", creq.out_dir, "optional JSON output directory");
  compare->add_option("--threads", creq.threads, "0 = all cores");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*analyze) return run_analyze(areq);
    if (*simulate) return run_simulate(sreq);
    if (*compare) return run_compare(creq);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
