#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pdpfi/dataset.hpp"
#include "pdpfi/errors.hpp"
#include "pdpfi/matrix.hpp"

namespace pdpfi {

/// A fitted prediction function. Deterministic: the same input matrix always
/// yields the same output vector.
class Model {
 public:
  virtual ~Model() = default;

  virtual void predict_into(const Matrix& x,
                            std::span<double> out) const = 0;

  /// Human-readable tag; for simple models it encodes the fitted parameters.
  virtual std::string descriptor() const = 0;

  std::vector<double> predict(const Matrix& x) const {
    std::vector<double> out(x.rows());
    predict_into(x, out);
    return out;
  }
};

using ModelPtr = std::shared_ptr<const Model>;

/// Wraps a closed-form function of a feature row as a Model. Used for known
/// regression functions in simulations and tests.
class FunctionModel final : public Model {
 public:
  using Fn = std::function<double(std::span<const double>)>;

  FunctionModel(Fn fn, std::string tag)
      : fn_(std::move(fn)), tag_(std::move(tag)) {}

  void predict_into(const Matrix& x, std::span<double> out) const override {
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = fn_(x.row(r));
  }

  std::string descriptor() const override { return tag_; }

 private:
  Fn fn_;
  std::string tag_;
};

/// A fitting procedure: (training view, seed) -> Model. Deterministic given
/// both arguments.
struct Learner {
  std::string name;
  std::function<ModelPtr(const IndexView&, std::uint64_t)> fit;
};

/// Per-instance squared loss, elementwise.
inline std::vector<double> loss_l2(std::span<const double> y,
                                   std::span<const double> yhat) {
  if (y.size() != yhat.size())
    throw Error(ErrorKind::LengthMismatch,
                "loss_l2: " + std::to_string(y.size()) + " vs " +
                    std::to_string(yhat.size()));
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    out[i] = d * d;
  }
  return out;
}

/// Per-instance loss used by the PFI estimators. Must decompose over rows;
/// set losses (AUC-style) do not fit this interface by construction.
using PerInstanceLoss = std::function<double(double y, double yhat)>;

inline double l2_loss(double y, double yhat) {
  const double d = y - yhat;
  return d * d;
}

}  // namespace pdpfi
