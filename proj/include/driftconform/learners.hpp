#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftconform/types.hpp"

namespace driftconform {

struct LinearParams {
  FeatureVec theta;

  std::size_t dim() const { return theta.size(); }
  double predict(const FeatureVec& x) const { return dot(theta, x); }
};

// Online stepsize schedule eta_t (t >= 1).
struct StepsizeSchedule {
  enum class Kind { Fixed, InverseSqrt, LsaLog, CappedInverse };

  Kind kind = Kind::Fixed;
  double a = 0.0;  // Fixed: eta; InverseSqrt: c; LsaLog: C; CappedInverse: gamma
  double b = 0.0;  // LsaLog: sigma_hat; CappedInverse: L

  // eta_t = eta
  static StepsizeSchedule fixed(double eta) {
    return {Kind::Fixed, eta, 0.0};
  }
  // eta_t = c / sqrt(t)
  static StepsizeSchedule inverse_sqrt(double c) {
    return {Kind::InverseSqrt, c, 0.0};
  }
  // eta_t = min(1 / sigma_hat, C * ln(t) / t)
  static StepsizeSchedule lsa_log(double c, double sigma_hat) {
    return {Kind::LsaLog, c, sigma_hat};
  }
  // eta_t = min(gamma / t, 1 / L)
  static StepsizeSchedule capped_inverse(double gamma, double smoothness) {
    return {Kind::CappedInverse, gamma, smoothness};
  }

  double at(std::int64_t t) const {
    if (t < 1) throw std::invalid_argument("stepsize index must be >= 1");
    const double td = static_cast<double>(t);
    switch (kind) {
      case Kind::Fixed: return a;
      case Kind::InverseSqrt: return a / std::sqrt(td);
      case Kind::LsaLog: return std::min(1.0 / b, a * std::log(td) / td);
      case Kind::CappedInverse: return std::min(a / td, 1.0 / b);
    }
    throw std::logic_error("unknown stepsize schedule");
  }
};

// One step of the squared-loss recursion with the factor-2 gradient
// convention: theta' = theta - eta * (2 x x^T theta - 2 y x).
inline LinearParams sgd_update(const LinearParams& params, double eta,
                               const FeatureVec& x, double y) {
  if (x.size() != params.dim())
    throw std::invalid_argument("dimension mismatch in sgd_update");
  if (eta < 0.0) throw std::invalid_argument("stepsize must be >= 0");
  const double residual = y - params.predict(x);
  LinearParams out = params;
  for (std::size_t i = 0; i < x.size(); ++i)
    out.theta[i] += 2.0 * eta * residual * x[i];
  return out;
}

namespace detail {

// Cholesky solve of the SPD system A z = rhs (A overwritten by its factor).
inline std::vector<double> cholesky_solve(std::vector<double> a,
                                          std::vector<double> rhs,
                                          std::size_t d) {
  for (std::size_t j = 0; j < d; ++j) {
    double diag = a[j * d + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * d + k] * a[j * d + k];
    if (!(diag > 0.0)) throw std::runtime_error("matrix not positive definite");
    const double ljj = std::sqrt(diag);
    a[j * d + j] = ljj;
    for (std::size_t i = j + 1; i < d; ++i) {
      double v = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i * d + k] * a[j * d + k];
      a[i * d + j] = v / ljj;
    }
  }
  // forward then backward substitution
  for (std::size_t i = 0; i < d; ++i) {
    double v = rhs[i];
    for (std::size_t k = 0; k < i; ++k) v -= a[i * d + k] * rhs[k];
    rhs[i] = v / a[i * d + i];
  }
  for (std::size_t ii = d; ii > 0; --ii) {
    const std::size_t i = ii - 1;
    double v = rhs[i];
    for (std::size_t k = i + 1; k < d; ++k) v -= a[k * d + i] * rhs[k];
    rhs[i] = v / a[i * d + i];
  }
  return rhs;
}

}  // namespace detail

// Ridge regression theta = (X^T X + lambda I)^{-1} X^T Y via Cholesky.
inline LinearParams fit_ridge(const std::vector<FeatureVec>& xs,
                              const std::vector<double>& ys, double lambda) {
  if (xs.empty() || xs.size() != ys.size())
    throw std::invalid_argument("fit_ridge needs matching nonempty X, Y");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  const std::size_t d = xs.front().size();
  std::vector<double> gram(d * d, 0.0);
  std::vector<double> xty(d, 0.0);
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const FeatureVec& x = xs[r];
    if (x.size() != d) throw std::invalid_argument("ragged design matrix");
    if (!std::isfinite(ys[r]))
      throw std::invalid_argument("non-finite response in fit_ridge");
    for (std::size_t i = 0; i < d; ++i) {
      if (!std::isfinite(x[i]))
        throw std::invalid_argument("non-finite feature in fit_ridge");
      xty[i] += x[i] * ys[r];
      for (std::size_t j = 0; j <= i; ++j) gram[i * d + j] += x[i] * x[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    gram[i * d + i] += lambda;
    for (std::size_t j = i + 1; j < d; ++j) gram[i * d + j] = gram[j * d + i];
  }
  return LinearParams{detail::cholesky_solve(std::move(gram), std::move(xty), d)};
}

// Immutable fitted-model snapshot produced by augmented refits.
using PointPredictor = std::function<double(const FeatureVec&)>;

// A predictive model handle: point prediction, one-sample online update and
// the one-step augmented refit used inside full conformal construction.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual double predict(const FeatureVec& x) const = 0;

  // Consume one stream observation.  Pretrained models ignore it.
  virtual void observe(const DataPoint& /*z*/) {}

  // Model refit with the training context augmented by the hypothesized
  // pair (x, y).  Must not mutate the learner.
  virtual PointPredictor augmented_fit(std::span<const DataPoint> train,
                                       const FeatureVec& x, double y) const = 0;

  virtual std::unique_ptr<Learner> clone() const = 0;

  virtual std::string kind() const = 0;

  // Parameter snapshot for serialization; empty when parameter-free.
  virtual FeatureVec parameters() const { return {}; }
};

inline double abs_residual_score(const Learner& model, const FeatureVec& x,
                                 double y) {
  const double pred = model.predict(x);
  if (!std::isfinite(pred)) throw std::runtime_error("learner diverged");
  return std::abs(y - pred);
}

// Constant predictor; augmentation-invariant.  With c = 0 this yields the
// covariate-agnostic absolute-response score |y|.
class ConstantLearner final : public Learner {
 public:
  explicit ConstantLearner(double c = 0.0) : c_(c) {}

  double predict(const FeatureVec&) const override { return c_; }

  PointPredictor augmented_fit(std::span<const DataPoint>, const FeatureVec&,
                               double) const override {
    const double c = c_;
    return [c](const FeatureVec&) { return c; };
  }

  std::unique_ptr<Learner> clone() const override {
    return std::make_unique<ConstantLearner>(*this);
  }

  std::string kind() const override { return "constant"; }
  FeatureVec parameters() const override { return {c_}; }

 private:
  double c_;
};

// Fixed linear model, e.g. a ridge fit frozen after pretraining.
// Augmentation-invariant: the hypothesized pair never changes the fit.
class PretrainedLinearLearner final : public Learner {
 public:
  explicit PretrainedLinearLearner(LinearParams params)
      : params_(std::move(params)) {}

  double predict(const FeatureVec& x) const override {
    return params_.predict(x);
  }

  PointPredictor augmented_fit(std::span<const DataPoint>, const FeatureVec&,
                               double) const override {
    const LinearParams p = params_;
    return [p](const FeatureVec& x) { return p.predict(x); };
  }

  std::unique_ptr<Learner> clone() const override {
    return std::make_unique<PretrainedLinearLearner>(*this);
  }

  std::string kind() const override { return "linear"; }
  FeatureVec parameters() const override { return params_.theta; }

 private:
  LinearParams params_;
};

// Linear model updated by online SGD.  The augmented refit replays the most
// recent update from the pre-update iterate with the hypothesized pair in
// place of the observed one, so a single hypothesized point perturbs the
// model by one stabilized step.
class OnlineSgdLearner final : public Learner {
 public:
  OnlineSgdLearner(LinearParams init, StepsizeSchedule schedule)
      : params_(std::move(init)),
        prev_params_(params_),
        schedule_(schedule) {}

  double predict(const FeatureVec& x) const override {
    return params_.predict(x);
  }

  void observe(const DataPoint& z) override {
    ++step_;
    prev_params_ = params_;
    prev_eta_ = schedule_.at(step_);
    params_ = sgd_update(params_, prev_eta_, z.x, z.y);
  }

  PointPredictor augmented_fit(std::span<const DataPoint>, const FeatureVec& x,
                               double y) const override {
    const double eta = step_ == 0 ? schedule_.at(1) : prev_eta_;
    LinearParams p = sgd_update(prev_params_, eta, x, y);
    return [p = std::move(p)](const FeatureVec& q) { return p.predict(q); };
  }

  std::unique_ptr<Learner> clone() const override {
    return std::make_unique<OnlineSgdLearner>(*this);
  }

  std::string kind() const override { return "online_sgd"; }
  FeatureVec parameters() const override { return params_.theta; }
  std::int64_t steps() const { return step_; }

 private:
  LinearParams params_;
  LinearParams prev_params_;
  StepsizeSchedule schedule_;
  double prev_eta_ = 0.0;
  std::int64_t step_ = 0;
};

// Reference full-refit learner: the augmented model is a ridge fit from
// scratch on train plus the hypothesized pair.  Intended for small
// calibration sets and oracle cross-checks.
class RidgeRefitLearner final : public Learner {
 public:
  explicit RidgeRefitLearner(double lambda, std::size_t dim)
      : lambda_(lambda), fit_{FeatureVec(dim, 0.0)} {}

  double predict(const FeatureVec& x) const override { return fit_.predict(x); }

  void observe(const DataPoint& z) override {
    xs_.push_back(z.x);
    ys_.push_back(z.y);
    fit_ = fit_ridge(xs_, ys_, lambda_);
  }

  PointPredictor augmented_fit(std::span<const DataPoint> train,
                               const FeatureVec& x, double y) const override {
    std::vector<FeatureVec> xs;
    std::vector<double> ys;
    xs.reserve(train.size() + 1);
    ys.reserve(train.size() + 1);
    for (const auto& z : train) {
      xs.push_back(z.x);
      ys.push_back(z.y);
    }
    xs.push_back(x);
    ys.push_back(y);
    LinearParams p = fit_ridge(xs, ys, lambda_);
    return [p = std::move(p)](const FeatureVec& q) { return p.predict(q); };
  }

  std::unique_ptr<Learner> clone() const override {
    return std::make_unique<RidgeRefitLearner>(*this);
  }

  std::string kind() const override { return "ridge_refit"; }
  FeatureVec parameters() const override { return fit_.theta; }

 private:
  double lambda_;
  LinearParams fit_;
  std::vector<FeatureVec> xs_;
  std::vector<double> ys_;
};

// Runs an online pipeline on `data` and on a copy with one point replaced,
// then reports the largest prediction discrepancy over the probe features.
// `make_learner` must build a fresh, identically initialized learner.
inline double stability_gap(const std::vector<DataPoint>& data,
                            std::size_t replace_index,
                            const DataPoint& replacement,
                            const std::function<std::unique_ptr<Learner>()>&
                                make_learner,
                            const std::vector<FeatureVec>& probes) {
  if (replace_index >= data.size())
    throw std::invalid_argument("replace_index out of range");
  auto base = make_learner();
  auto perturbed = make_learner();
  for (std::size_t i = 0; i < data.size(); ++i) {
    base->observe(data[i]);
    perturbed->observe(i == replace_index ? replacement : data[i]);
  }
  double gap = 0.0;
  for (const auto& x : probes)
    gap = std::max(gap, std::abs(base->predict(x) - perturbed->predict(x)));
  return gap;
}

}  // namespace driftconform
