#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pdpfi/rng.hpp"
#include "pdpfi/tree.hpp"

namespace pdpfi {

struct ForestParams {
  std::size_t n_trees = 100;
  TreeParams tree{};
  std::size_t features_per_split = 0;  // 0 = ceil(p / 3), resolved at fit
  bool bootstrap_rows = true;
};

/// Bagged CART ensemble; the prediction is the arithmetic mean over trees.
class ForestModel final : public Model {
 public:
  ForestModel(std::vector<std::shared_ptr<const TreeModel>> trees,
              std::uint64_t seed)
      : trees_(std::move(trees)), seed_(seed) {}

  void predict_into(const Matrix& x, std::span<double> out) const override {
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = 0.0;
    for (const auto& tree : trees_)
      for (std::size_t r = 0; r < x.rows(); ++r)
        out[r] += tree->predict_row(x.row(r));
    const double inv = 1.0 / static_cast<double>(trees_.size());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] *= inv;
  }

  std::string descriptor() const override {
    std::ostringstream os;
    os << "rf(trees=" << trees_.size() << ", seed=" << seed_ << ")";
    return os.str();
  }

  const std::vector<std::shared_ptr<const TreeModel>>& trees() const {
    return trees_;
  }

 private:
  std::vector<std::shared_ptr<const TreeModel>> trees_;
  std::uint64_t seed_;
};

/// Each tree gets its own stream derived from (seed, tree index), drawn on
/// first for the bootstrap rows and then for per-split feature sampling, so
/// the forest is identical no matter how trees are scheduled.
inline ModelPtr fit_forest(const IndexView& train, const ForestParams& params,
                           std::uint64_t seed) {
  if (train.empty())
    throw Error(ErrorKind::EmptyTrainingSet, "fit_forest on empty view");
  if (params.n_trees < 1)
    throw Error(ErrorKind::InvalidArgument, "n_trees must be >= 1");
  const std::size_t p = train.base->n_features();
  const std::size_t mtry =
      params.features_per_split == 0
          ? (p + 2) / 3  // ceil(p / 3)
          : params.features_per_split;
  if (mtry < 1 || mtry > p)
    throw Error(ErrorKind::InvalidArgument,
                "features_per_split must be in [1, p]");

  const std::size_t n = train.size();
  std::vector<std::shared_ptr<const TreeModel>> trees(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(seed, t));
    std::vector<std::size_t> positions(n);
    if (params.bootstrap_rows) {
      for (std::size_t i = 0; i < n; ++i) positions[i] = rng.bounded(n);
    } else {
      std::iota(positions.begin(), positions.end(), std::size_t{0});
    }
    trees[t] = detail::fit_tree_impl(train, positions, params.tree, mtry, &rng);
  }
  return std::make_shared<ForestModel>(std::move(trees), seed);
}

inline Learner forest_learner(ForestParams params = {}) {
  return Learner{"rf", [params](const IndexView& train, std::uint64_t seed) {
                   return fit_forest(train, params, seed);
                 }};
}

}  // namespace pdpfi
