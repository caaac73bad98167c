#pragma once

// Conformal predictive system for GP interpolation: closed-form affine
// thresholds, the stepwise randomized predictive CDF, quantiles, and central
// prediction intervals.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gpcal/gp.hpp"

namespace gpcal {

struct ThresholdSet {
  Eigen::VectorXd slopes;      // beta_i > 0
  Eigen::VectorXd thresholds;  // c_i
  double test_mean = 0.0;      // m_n(x*)
  double test_sd = 0.0;        // sqrt(v)
};

// Affine decomposition R_{n+1}^z - R_i^z = beta_i (z - c_i) with
//   beta_i = 1/sqrt(v) + u_i / (v d_i),  d_i = sqrt((K^-1)_ii + u_i^2/v),
//   c_i = m_n + v a_i / (sqrt(v (K^-1)_ii + u_i^2) + u_i),
// a = K^-1 (z - m 1), u = K^-1 k_*, v = sigma_n^2(x*).
inline ThresholdSet compute_thresholds(const FittedGP& gp,
                                       const Eigen::VectorXd& x_star) {
  PosteriorDetail det = gp.posterior_detail(x_star);
  const double sigma = std::sqrt(gp.params().variance);
  const double v = det.var;
  const double s = std::sqrt(v);
  if (!(s > 1e-8 * sigma))
    throw std::runtime_error(
        "test point coincides with a design point (sigma_n ~ 0)");
  const Eigen::VectorXd& a = gp.alpha();
  const Eigen::VectorXd& q = gp.diag_inv();
  const Eigen::VectorXd& u = det.u;
  const Eigen::Index n = a.size();

  ThresholdSet out;
  out.test_mean = det.mean;
  out.test_sd = s;
  out.slopes.resize(n);
  out.thresholds.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double di = std::sqrt(q[i] + u[i] * u[i] / v);
    out.slopes[i] = 1.0 / s + u[i] / (v * di);
    out.thresholds[i] =
        det.mean + v * a[i] / (std::sqrt(v * q[i] + u[i] * u[i]) + u[i]);
  }
  return out;
}

// Stepwise CPD: on the open interval (c_(i), c_(i+1)) the value is
// (i + tau)/(n + 1); at a tie block c_(i') = ... = c_(i'') the value is
// (i'-1 + tau (i''-i'+2))/(n+1). Both cases reduce to
//   [#{c < z} + tau (#{c = z} + 1)] / (n + 1).
class StepwiseCpd {
 public:
  StepwiseCpd(std::vector<double> thresholds, double tau)
      : sorted_(std::move(thresholds)), tau_(tau) {
    if (tau_ < 0.0 || tau_ > 1.0) throw std::invalid_argument("tau in [0,1]");
    if (sorted_.empty()) throw std::invalid_argument("no thresholds");
    std::sort(sorted_.begin(), sorted_.end());
  }

  const std::vector<double>& sorted_thresholds() const { return sorted_; }
  double tau() const { return tau_; }
  int n() const { return static_cast<int>(sorted_.size()); }

  // Tie tolerance 1e-12 (1 + |c|), applied symmetrically around z.
  static double tie_tol(double z) { return 1e-12 * (1.0 + std::fabs(z)); }

  // Count of thresholds strictly below / equal to z under the tie tolerance.
  std::pair<int, int> counts(double z) const {
    double tol = tie_tol(z);
    auto lt = std::lower_bound(sorted_.begin(), sorted_.end(), z - tol);
    auto le = std::upper_bound(sorted_.begin(), sorted_.end(), z + tol);
    int below = static_cast<int>(lt - sorted_.begin());
    int equal = static_cast<int>(le - lt);
    return {below, equal};
  }

  double eval(double z) const {
    auto [below, equal] = counts(z);
    return (below + tau_ * (equal + 1)) / (n() + 1.0);
  }

  // Left and right limits of the tau-family envelope; the jump at any z
  // includes the 1/(n+1) mass of the test score tied with itself, so
  // left_limit + tau (right_limit - left_limit) reproduces eval(z).
  double left_limit(double z) const {
    return counts(z).first / (n() + 1.0);
  }
  double right_limit(double z) const {
    auto [below, equal] = counts(z);
    return (below + equal + 1.0) / (n() + 1.0);
  }

  // Generalized inverse inf{z : F(z) >= p}: returns c_(r) with
  // r = min{r : (r + tau)/(n+1) >= p}, -inf when p <= tau/(n+1), +inf when
  // no finite level reaches p. Level comparisons carry a 1e-9 slack so that
  // exact boundary combinations resolve per the strict/non-strict sides.
  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p outside (0,1)");
    const double target = p * (n() + 1.0);
    constexpr double eps = 1e-9;
    if (target <= tau_ + eps) return -std::numeric_limits<double>::infinity();
    int r = static_cast<int>(std::ceil(target - tau_ - eps));
    if (r < 1) r = 1;
    if (r > n()) return std::numeric_limits<double>::infinity();
    return sorted_[r - 1];
  }

 private:
  std::vector<double> sorted_;
  double tau_;
};

inline StepwiseCpd make_cpd(const ThresholdSet& ts, double tau) {
  return StepwiseCpd(
      std::vector<double>(ts.thresholds.data(), ts.thresholds.data() + ts.thresholds.size()),
      tau);
}

struct PredictionInterval {
  double lower = 0.0;   // may be -inf
  double upper = 0.0;   // may be +inf
  bool closed_left = true;
  bool open_right = false;
  double level = 0.0;   // 1 - alpha

  bool lower_finite() const { return std::isfinite(lower); }
  bool upper_finite() const { return std::isfinite(upper); }
  bool finite() const { return lower_finite() && upper_finite(); }
  double width() const { return upper - lower; }
  bool contains(double z) const {
    bool left_ok = closed_left ? z >= lower : z > lower;
    bool right_ok = open_right ? z < upper : z <= upper;
    return left_ok && right_ok;
  }
};

// Central (1-alpha) interval, half-open [lo, hi).
inline PredictionInterval interval(const StepwiseCpd& cpd, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha outside (0,1)");
  PredictionInterval out;
  out.lower = cpd.quantile(alpha / 2.0);
  out.upper = cpd.quantile(1.0 - alpha / 2.0);
  out.closed_left = true;
  out.open_right = true;
  out.level = 1.0 - alpha;
  return out;
}

// Randomized rank of the test score: equals the CPD evaluated at z with the
// given tau.
inline double cps_pit(const FittedGP& gp, const Eigen::VectorXd& x, double z,
                      double tau) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("tau in [0,1]");
  return make_cpd(compute_thresholds(gp, x), tau).eval(z);
}

}  // namespace gpcal
