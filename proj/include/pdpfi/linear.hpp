#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pdpfi/dataset.hpp"
#include "pdpfi/model.hpp"
#include "pdpfi/serialize.hpp"

namespace pdpfi {

/// Ordinary least squares fit with intercept.
class LinearModel final : public Model {
 public:
  LinearModel(double intercept, std::vector<double> coefficients,
              bool ridge_fallback)
      : intercept_(intercept),
        coefficients_(std::move(coefficients)),
        ridge_fallback_(ridge_fallback) {}

  void predict_into(const Matrix& x, std::span<double> out) const override {
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double v = intercept_;
      const auto row = x.row(r);
      for (std::size_t c = 0; c < coefficients_.size(); ++c)
        v += coefficients_[c] * row[c];
      out[r] = v;
    }
  }

  std::string descriptor() const override {
    std::ostringstream os;
    os << "lm(intercept=" << format_double(intercept_) << ", coefs=[";
    for (std::size_t c = 0; c < coefficients_.size(); ++c) {
      if (c) os << ',';
      os << format_double(coefficients_[c]);
    }
    os << "]";
    if (ridge_fallback_) os << ", ridge_fallback";
    os << ")";
    return os.str();
  }

  double intercept() const { return intercept_; }
  const std::vector<double>& coefficients() const { return coefficients_; }
  bool used_ridge_fallback() const { return ridge_fallback_; }

 private:
  double intercept_;
  std::vector<double> coefficients_;
  bool ridge_fallback_;
};

/// OLS via column-pivoted Householder QR. Rank-deficient designs (bootstrap
/// duplicates, constant columns) fall back to ridge with penalty 1e-8; the
/// fallback is recorded in the descriptor.
inline ModelPtr fit_linear(const IndexView& train) {
  const std::size_t n = train.size();
  if (n == 0)
    throw Error(ErrorKind::EmptyTrainingSet, "fit_linear on empty view");
  const std::size_t p = train.base->n_features();

  Eigen::MatrixXd design(n, p + 1);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    const auto row = train.base->features().row(train.rows[i]);
    for (std::size_t c = 0; c < p; ++c) design(i, c + 1) = row[c];
    y(i) = train.base->target()[train.rows[i]];
  }

  bool ridge = false;
  Eigen::VectorXd beta;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (n >= p + 1 && qr.rank() == static_cast<Eigen::Index>(p + 1)) {
    beta = qr.solve(y);
  } else {
    ridge = true;
    constexpr double kPenalty = 1e-8;
    const Eigen::MatrixXd gram =
        design.transpose() * design +
        kPenalty * Eigen::MatrixXd::Identity(p + 1, p + 1);
    beta = gram.ldlt().solve(design.transpose() * y);
  }
  for (Eigen::Index c = 0; c < beta.size(); ++c)
    if (!std::isfinite(beta(c)))
      throw Error(ErrorKind::DegenerateDesign,
                  "linear solve produced non-finite coefficients");

  std::vector<double> coefs(p);
  for (std::size_t c = 0; c < p; ++c) coefs[c] = beta(c + 1);
  return std::make_shared<LinearModel>(beta(0), std::move(coefs), ridge);
}

inline Learner linear_learner() {
  return Learner{"lm", [](const IndexView& train, std::uint64_t) {
                   return fit_linear(train);
                 }};
}

}  // namespace pdpfi
