#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pdpfi/dataset.hpp"
#include "pdpfi/model.hpp"
#include "pdpfi/rng.hpp"

namespace pdpfi {

struct TreeParams {
  std::size_t max_depth = 30;
  std::size_t min_leaf = 5;
};

/// Axis-aligned CART regression tree. Splits maximize the reduction in sum of
/// squared deviations; leaves predict the training mean. Rows with value <=
/// threshold go left.
class TreeModel final : public Model {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
  };

  explicit TreeModel(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  double predict_row(std::span<const double> row) const {
    std::int32_t at = 0;
    while (nodes_[at].feature >= 0) {
      const Node& nd = nodes_[at];
      at = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                     : nd.right;
    }
    return nodes_[at].value;
  }

  void predict_into(const Matrix& x, std::span<double> out) const override {
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
  }

  std::string descriptor() const override {
    std::ostringstream os;
    os << "tree(nodes=" << nodes_.size() << ", leaves=" << n_leaves() << ")";
    return os.str();
  }

  std::size_t n_nodes() const { return nodes_.size(); }
  std::size_t n_leaves() const {
    std::size_t k = 0;
    for (const Node& nd : nodes_)
      if (nd.feature < 0) ++k;
    return k;
  }
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  std::vector<Node> nodes_;
};

namespace detail {

struct TreeBuilder {
  // Local sample space: column-major features and aligned targets. Each
  // feature keeps an index array sorted by (value, index) once at the root;
  // splits stable-partition every array, which preserves the order within
  // both children and avoids re-sorting per node.
  std::vector<std::vector<double>> cols;
  std::vector<double> y;
  TreeParams params;
  std::size_t mtry = 0;
  Rng* rng = nullptr;  // only consulted when mtry < p

  std::vector<TreeModel::Node> nodes;
  std::vector<std::vector<std::size_t>> sorted;  // p arrays over sample slots
  std::vector<char> goes_left;                   // per-sample split mask
  std::vector<std::size_t> scratch;              // partition buffer

  std::size_t p() const { return cols.size(); }

  void init_root() {
    const std::size_t n = y.size();
    sorted.assign(p(), {});
    for (std::size_t f = 0; f < p(); ++f) {
      sorted[f].resize(n);
      std::iota(sorted[f].begin(), sorted[f].end(), std::size_t{0});
      const std::vector<double>& col = cols[f];
      std::sort(sorted[f].begin(), sorted[f].end(),
                [&col](std::size_t a, std::size_t b) {
                  return col[a] != col[b] ? col[a] < col[b] : a < b;
                });
    }
    goes_left.assign(n, 0);
    scratch.resize(n);
  }

  std::int32_t build(std::size_t begin, std::size_t end, std::size_t depth) {
    const std::size_t k = end - begin;
    double ysum = 0.0;
    double ymin = y[sorted[0][begin]];
    double ymax = ymin;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = y[sorted[0][i]];
      ysum += v;
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
    const double mean = ysum / static_cast<double>(k);

    const bool splittable = depth < params.max_depth &&
                            k >= 2 * params.min_leaf && ymin < ymax;
    std::int32_t best_feature = -1;
    double best_gain = 0.0;
    double best_threshold = 0.0;
    std::size_t best_left = 0;

    if (splittable) {
      for (std::size_t f : candidate_features()) {
        const std::vector<double>& col = cols[f];
        const std::size_t* ord = sorted[f].data() + begin;
        double sum_left = 0.0;
        for (std::size_t pos = 0; pos + 1 < k; ++pos) {
          sum_left += y[ord[pos]];
          const std::size_t n_left = pos + 1;
          const std::size_t n_right = k - n_left;
          if (n_right < params.min_leaf) break;
          if (n_left < params.min_leaf) continue;
          const double v = col[ord[pos]];
          const double vn = col[ord[pos + 1]];
          if (v == vn) continue;  // threshold must separate distinct values
          const double sum_right = ysum - sum_left;
          const double gain = sum_left * sum_left / n_left +
                              sum_right * sum_right / n_right -
                              ysum * ysum / static_cast<double>(k);
          // Strict > keeps the first maximum: ties break to the lowest
          // feature index, then the lowest threshold.
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = static_cast<std::int32_t>(f);
            best_threshold = v + 0.5 * (vn - v);
            best_left = n_left;
          }
        }
      }
    }

    if (best_feature < 0 || best_gain <= 0.0) {
      nodes.push_back({-1, 0.0, -1, -1, mean});
      return static_cast<std::int32_t>(nodes.size() - 1);
    }

    // The left child is exactly the first best_left entries of the winning
    // feature's order; mark them and stable-partition every feature array.
    const std::vector<std::size_t>& win = sorted[best_feature];
    for (std::size_t i = begin; i < begin + best_left; ++i)
      goes_left[win[i]] = 1;
    for (std::size_t f = 0; f < p(); ++f) {
      std::vector<std::size_t>& ord = sorted[f];
      std::size_t lo = 0, hi = best_left;
      for (std::size_t i = begin; i < end; ++i) {
        if (goes_left[ord[i]])
          scratch[lo++] = ord[i];
        else
          scratch[hi++] = ord[i];
      }
      std::copy(scratch.begin(), scratch.begin() + k, ord.begin() + begin);
    }
    for (std::size_t i = begin; i < begin + best_left; ++i)
      goes_left[win[i]] = 0;

    const std::size_t mid = begin + best_left;
    const std::int32_t self = static_cast<std::int32_t>(nodes.size());
    nodes.push_back({best_feature, best_threshold, -1, -1, mean});
    const std::int32_t left = build(begin, mid, depth + 1);
    const std::int32_t right = build(mid, end, depth + 1);
    nodes[self].left = left;
    nodes[self].right = right;
    return self;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> all(p());
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (mtry >= p() || rng == nullptr) return all;
    // Partial Fisher-Yates, then ascending order so tie-breaking matches the
    // full-feature scan.
    for (std::size_t i = 0; i < mtry; ++i) {
      const std::size_t j = i + rng->bounded(all.size() - i);
      std::swap(all[i], all[j]);
    }
    all.resize(mtry);
    std::sort(all.begin(), all.end());
    return all;
  }
};

/// Core CART fit over an explicit multiset of view positions (0-based into
/// `train`). `mtry < p` turns on per-split feature sampling via `rng`.
inline std::shared_ptr<const TreeModel> fit_tree_impl(
    const IndexView& train, std::span<const std::size_t> positions,
    const TreeParams& params, std::size_t mtry, Rng* rng) {
  const std::size_t n = positions.size();
  const std::size_t p = train.base->n_features();
  TreeBuilder builder;
  builder.cols.assign(p, std::vector<double>(n));
  builder.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = train.rows[positions[i]];
    for (std::size_t c = 0; c < p; ++c)
      builder.cols[c][i] = train.base->features()(row, c);
    builder.y[i] = train.base->target()[row];
  }
  builder.params = params;
  builder.mtry = mtry;
  builder.rng = rng;
  builder.init_root();
  builder.build(0, n, 0);
  return std::make_shared<TreeModel>(std::move(builder.nodes));
}

}  // namespace detail

inline ModelPtr fit_tree(const IndexView& train, const TreeParams& params) {
  if (train.empty())
    throw Error(ErrorKind::EmptyTrainingSet, "fit_tree on empty view");
  if (params.max_depth < 1 || params.min_leaf < 1)
    throw Error(ErrorKind::InvalidArgument,
                "tree params must satisfy max_depth >= 1, min_leaf >= 1");
  std::vector<std::size_t> positions(train.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  return detail::fit_tree_impl(train, positions, params,
                               train.base->n_features(), nullptr);
}

inline Learner tree_learner(TreeParams params = {}) {
  return Learner{"tree", [params](const IndexView& train, std::uint64_t) {
                   return fit_tree(train, params);
                 }};
}

}  // namespace pdpfi
