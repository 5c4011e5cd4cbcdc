#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdpfi/dataset.hpp"
#include "pdpfi/model.hpp"
#include "pdpfi/parallel.hpp"
#include "pdpfi/resampling.hpp"
#include "pdpfi/rng.hpp"

namespace pdpfi {

/// The m refits of a resample plan: one model per split plus its test view
/// and the plan's correction constant. Fitting once and reusing the models
/// across PD features and PFI features is the intended workflow.
struct PlanFits {
  std::vector<ModelPtr> models;
  std::vector<IndexView> tests;
  double c = 0.0;
  std::uint64_t seed = 0;
  std::string learner;
  std::string resampling;
};

/// Fits one model per split with seed derived from (seed, split index). Fit
/// errors are rethrown tagged with the split.
inline PlanFits fit_plan_models(const Learner& learner, const Dataset& data,
                                const ResamplePlan& plan, std::uint64_t seed,
                                unsigned threads = 1) {
  if (plan.m() < 2)
    throw Error(ErrorKind::TooFewSplits, "plan needs m >= 2 splits");
  if (plan.n != data.n_rows())
    throw Error(ErrorKind::PlanMismatch,
                "plan was built for n = " + std::to_string(plan.n) +
                    ", dataset has n = " + std::to_string(data.n_rows()));
  PlanFits fits;
  fits.models.resize(plan.m());
  fits.tests.resize(plan.m());
  fits.c = correction_constant(plan);
  fits.seed = seed;
  fits.learner = learner.name;
  fits.resampling = resample_mode_name(plan.mode);
  parallel_for(plan.m(), threads, [&](std::size_t d) {
    try {
      const IndexView train = view(data, plan.splits[d].train);
      fits.models[d] = learner.fit(train, derive_seed(seed, d));
      fits.tests[d] = view(data, plan.splits[d].test);
    } catch (const Error& e) {
      throw Error(e.kind(),
                  std::string(e.what()) + " [split " + std::to_string(d) + "]");
    }
  });
  return fits;
}

/// Per-split per-instance losses of each model on its own test view.
inline std::vector<std::vector<double>> per_split_losses(
    const PlanFits& fits, const PerInstanceLoss& loss = l2_loss) {
  std::vector<std::vector<double>> out(fits.models.size());
  for (std::size_t d = 0; d < fits.models.size(); ++d) {
    const IndexView& test = fits.tests[d];
    const std::vector<double> y = test.gather_target();
    const std::vector<double> pred =
        fits.models[d]->predict(test.gather_features());
    out[d].resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
      out[d][i] = loss(y[i], pred[i]);
  }
  return out;
}

}  // namespace pdpfi
