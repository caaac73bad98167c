#pragma once

// Predictive-CDF capability used by the metric suite: evaluators for the
// CDF, its left limit, and the generalized inverse, plus the two absolute
// moments (E|Z - z| and E|Z - Z'|) every scoring rule needs. Concrete kinds:
// smooth GN location-scale laws (the GP and BCR predictives), the stepwise
// conformal law, finite empirical laws, and point masses.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gpcal/bcr.hpp"
#include "gpcal/cps.hpp"
#include "gpcal/gn.hpp"

namespace gpcal {

enum class CdfKind { smooth, stepwise, empirical, dirac };

class PredictiveCdf {
 public:
  virtual ~PredictiveCdf() = default;
  virtual CdfKind kind() const = 0;
  virtual double cdf(double z) const = 0;        // right-continuous F(z)
  virtual double left_cdf(double z) const = 0;   // F(z-)
  virtual double quantile(double p) const = 0;   // inf{z : F(z) >= p}
  virtual double mean_abs(double z) const = 0;   // E|Z - z|
  virtual double dispersion() const = 0;         // E|Z - Z'|
  virtual double log_density(double) const {
    throw std::logic_error("log density undefined for this CDF kind");
  }
};

using CdfList = std::vector<std::unique_ptr<PredictiveCdf>>;

// Z = loc + scale * U with U ~ GN(shape, 0, scale' = theta.scale).
class GnLocationScaleCdf final : public PredictiveCdf {
 public:
  GnLocationScaleCdf(double loc, double scale, GNParams theta)
      : loc_(loc), scale_(scale), theta_(theta) {
    if (!(scale > 0.0)) throw std::invalid_argument("scale must be > 0");
    theta_.validate();
  }

  // The Gaussian N(loc, scale^2) member: GN(2, sqrt(2)) is standard normal.
  static GnLocationScaleCdf gaussian(double loc, double scale) {
    return GnLocationScaleCdf(loc, scale, GNParams{2.0, std::sqrt(2.0)});
  }

  CdfKind kind() const override { return CdfKind::smooth; }
  double cdf(double z) const override {
    return gn_cdf(theta_, (z - loc_) / scale_);
  }
  double left_cdf(double z) const override { return cdf(z); }
  double quantile(double p) const override {
    return loc_ + scale_ * gn_quantile(theta_, p);
  }
  double mean_abs(double z) const override {
    return scale_ * gn_mean_abs(theta_, (z - loc_) / scale_);
  }
  double dispersion() const override {
    return scale_ * gn_self_dispersion(theta_);
  }
  double log_density(double z) const override {
    return gn_log_pdf(theta_, (z - loc_) / scale_) - std::log(scale_);
  }

  double loc() const { return loc_; }
  double scale() const { return scale_; }
  const GNParams& theta() const { return theta_; }

 private:
  double loc_, scale_;
  GNParams theta_;
};

class DiracCdf final : public PredictiveCdf {
 public:
  explicit DiracCdf(double atom) : atom_(atom) {}

  CdfKind kind() const override { return CdfKind::dirac; }
  double cdf(double z) const override { return z >= atom_ ? 1.0 : 0.0; }
  double left_cdf(double z) const override { return z > atom_ ? 1.0 : 0.0; }
  double quantile(double) const override { return atom_; }
  double mean_abs(double z) const override { return std::fabs(z - atom_); }
  double dispersion() const override { return 0.0; }

  double atom() const { return atom_; }

 private:
  double atom_;
};

// Finite law with mass weights[i] at sorted atoms[i].
class EmpiricalCdf final : public PredictiveCdf {
 public:
  EmpiricalCdf(std::vector<double> atoms, std::vector<double> weights)
      : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.empty() || atoms_.size() != weights_.size())
      throw std::invalid_argument("mismatched atoms and weights");
    if (!std::is_sorted(atoms_.begin(), atoms_.end()))
      throw std::invalid_argument("atoms must be sorted");
    cum_.resize(weights_.size());
    std::partial_sum(weights_.begin(), weights_.end(), cum_.begin());
    double total = cum_.back();
    if (std::fabs(total - 1.0) > 1e-9)
      throw std::invalid_argument("weights must sum to 1");
    for (auto& c : cum_) c /= total;
    cum_.back() = 1.0;
  }

  static EmpiricalCdf uniform_atoms(std::vector<double> atoms) {
    std::sort(atoms.begin(), atoms.end());
    std::vector<double> w(atoms.size(), 1.0 / atoms.size());
    return EmpiricalCdf(std::move(atoms), std::move(w));
  }

  CdfKind kind() const override { return CdfKind::empirical; }

  double cdf(double z) const override {
    auto it = std::upper_bound(atoms_.begin(), atoms_.end(), z);
    return it == atoms_.begin() ? 0.0 : cum_[it - atoms_.begin() - 1];
  }

  double left_cdf(double z) const override {
    auto it = std::lower_bound(atoms_.begin(), atoms_.end(), z);
    return it == atoms_.begin() ? 0.0 : cum_[it - atoms_.begin() - 1];
  }

  double quantile(double p) const override {
    if (!(p > 0.0 && p <= 1.0))
      throw std::invalid_argument("quantile probability outside (0,1]");
    auto it = std::lower_bound(cum_.begin(), cum_.end(), p);
    return atoms_[std::min<std::size_t>(it - cum_.begin(), atoms_.size() - 1)];
  }

  double mean_abs(double z) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      s += weights_[i] * std::fabs(atoms_[i] - z);
    return s;
  }

  double dispersion() const override {
    double s = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      for (std::size_t j = i + 1; j < atoms_.size(); ++j)
        s += 2.0 * weights_[i] * weights_[j] * (atoms_[j] - atoms_[i]);
    return s;
  }

  const std::vector<double>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> atoms_, weights_, cum_;
};

// The stepwise conformal law. cdf/left_cdf expose the randomization
// envelope (upper and lower limits over the uniform draw), so the PIT
// randomization a- + tau (a - a-) reproduces the conformal transducer;
// quantiles use the stored tau and may be infinite in the tails. Scoring
// treats the law as atoms on the thresholds, with the tail masses
// tau/(n+1) and (1-tau)/(n+1) clipped onto the extreme atoms.
class StepwiseCdf final : public PredictiveCdf {
 public:
  explicit StepwiseCdf(StepwiseCpd cpd) : cpd_(std::move(cpd)) {
    const auto& c = cpd_.sorted_thresholds();
    const std::size_t n = c.size();
    atom_weights_.assign(n, 1.0 / (n + 1));
    atom_weights_.front() += cpd_.tau() / (n + 1);
    atom_weights_.back() += (1.0 - cpd_.tau()) / (n + 1);
  }

  CdfKind kind() const override { return CdfKind::stepwise; }

  double cdf(double z) const override { return cpd_.right_limit(z); }
  double left_cdf(double z) const override { return cpd_.left_limit(z); }
  double quantile(double p) const override { return cpd_.quantile(p); }

  double mean_abs(double z) const override {
    const auto& c = cpd_.sorted_thresholds();
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
      s += atom_weights_[i] * std::fabs(c[i] - z);
    return s;
  }

  double dispersion() const override {
    const auto& c = cpd_.sorted_thresholds();
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = i + 1; j < c.size(); ++j)
        s += 2.0 * atom_weights_[i] * atom_weights_[j] * (c[j] - c[i]);
    return s;
  }

  const StepwiseCpd& cpd() const { return cpd_; }

 private:
  StepwiseCpd cpd_;
  std::vector<double> atom_weights_;
};

// Convenience constructors for the three methods at a test point.
inline std::unique_ptr<PredictiveCdf> gp_predictive_cdf(const Posterior& p) {
  if (p.sd == 0.0) return std::make_unique<DiracCdf>(p.mean);
  return std::make_unique<GnLocationScaleCdf>(
      GnLocationScaleCdf::gaussian(p.mean, p.sd));
}

inline std::unique_ptr<PredictiveCdf> bcr_predictive_cdf(
    const BcrPredictive& b) {
  if (b.gp_posterior.sd == 0.0)
    return std::make_unique<DiracCdf>(b.gp_posterior.mean);
  return std::make_unique<GnLocationScaleCdf>(
      b.gp_posterior.mean, b.gp_posterior.sd, b.selected);
}

inline std::unique_ptr<PredictiveCdf> cps_predictive_cdf(StepwiseCpd cpd) {
  return std::make_unique<StepwiseCdf>(std::move(cpd));
}

}  // namespace gpcal
