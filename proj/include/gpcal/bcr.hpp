#pragma once

// Bayesian-calibrated residuals: uniform-prior posterior over the
// generalized-normal (shape, scale) given LOO residuals, sampled by adaptive
// random-walk Metropolis in log coordinates; two selection rules; and the
// smooth location-scale predictive built from the selected parameter.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gpcal/gn.hpp"
#include "gpcal/gp.hpp"
#include "gpcal/rng.hpp"

namespace gpcal {

struct GNPosterior {
  std::vector<GNParams> draws;
  double prior_a = 10.0;
  double prior_b = 10.0;
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline double gn_log_likelihood(const std::vector<double>& abs_r, double beta,
                                double lambda) {
  double n = static_cast<double>(abs_r.size());
  double lp = n * (std::log(beta) - std::log(2.0 * lambda) -
                   std::lgamma(1.0 / beta));
  for (double a : abs_r) lp -= std::pow(a / lambda, beta);
  return lp;
}

}  // namespace detail

// Random-walk Metropolis on (log beta, log lambda) with flat priors on
// (0,a)x(0,b); the log map contributes a log beta + log lambda Jacobian.
// Proposal scale adapts in batches of 50 during burn-in toward acceptance
// 0.3, then freezes; every 5th post-burn-in state is retained.
inline GNPosterior posterior_sample(const std::vector<double>& residuals,
                                    std::pair<double, double> bounds, int K,
                                    std::uint64_t seed) {
  if (residuals.size() < 5)
    throw std::invalid_argument("posterior_sample needs at least 5 residuals");
  const double a = bounds.first, b = bounds.second;
  if (!(a > 0.0 && b > 0.0))
    throw std::invalid_argument("prior bounds must be positive");
  if (K < 100) throw std::invalid_argument("K must be at least 100");

  std::vector<double> abs_r(residuals.size());
  double sumsq = 0.0;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    abs_r[i] = std::fabs(residuals[i]);
    sumsq += residuals[i] * residuals[i];
  }
  if (sumsq == 0.0)
    throw std::invalid_argument("all residuals are zero; residual law degenerate");

  const double rms = std::sqrt(sumsq / static_cast<double>(abs_r.size()));
  double beta = std::min(2.0, 0.5 * a);
  double lambda = std::min(rms * std::sqrt(2.0), 0.5 * b);
  double lb = std::log(beta), ll = std::log(lambda);

  auto log_post = [&](double lbeta, double llam) {
    double be = std::exp(lbeta), la = std::exp(llam);
    if (!(be < a) || !(la < b)) return -std::numeric_limits<double>::infinity();
    return detail::gn_log_likelihood(abs_r, be, la) + lbeta + llam;
  };

  Rng rng(seed);
  double lp = log_post(lb, ll);
  double step = 0.5;
  const int burn_in = 2000, thin = 5;
  const int total = burn_in + thin * K;
  int batch_accept = 0, kept_accept = 0;

  GNPosterior post;
  post.draws.reserve(K);
  post.prior_a = a;
  post.prior_b = b;
  post.seed = seed;

  for (int it = 0; it < total; ++it) {
    double plb = lb + step * rng.normal();
    double pll = ll + step * rng.normal();
    double plp = log_post(plb, pll);
    bool accept = std::log(rng.uniform() + 1e-300) < plp - lp;
    if (accept) {
      lb = plb;
      ll = pll;
      lp = plp;
    }
    if (it < burn_in) {
      batch_accept += accept;
      if ((it + 1) % 50 == 0) {
        double frac = batch_accept / 50.0;
        step *= std::exp(std::clamp(frac - 0.3, -0.5, 0.5));
        batch_accept = 0;
      }
    } else {
      kept_accept += accept;
      if ((it - burn_in + 1) % thin == 0)
        post.draws.push_back(GNParams{std::exp(lb), std::exp(ll)});
    }
  }
  post.acceptance_rate = kept_accept / static_cast<double>(thin * K);
  return post;
}

namespace detail {

// Lower empirical quantile: order statistic at 1-based index ceil(q * m).
inline std::size_t quantile_index(double q, std::size_t m) {
  double raw = std::ceil(q * static_cast<double>(m));
  auto idx = static_cast<std::size_t>(std::max(raw, 1.0));
  return std::min(idx, m) - 1;
}

}  // namespace detail

// Rule 1 target: the empirical (1-delta)-quantile of the draw variances.
inline double rule1_variance_target(const GNPosterior& post, double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("delta outside (0,1)");
  if (post.draws.empty()) throw std::invalid_argument("empty posterior");
  std::vector<double> v(post.draws.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = gn_variance(post.draws[j]);
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  return sorted[detail::quantile_index(1.0 - delta, sorted.size())];
}

// Rule 1: conservative selection. Returns the draw whose variance is nearest
// the (1-delta) variance quantile; ties break to the smaller index.
inline GNParams select_rule1(const GNPosterior& post, double delta) {
  double target = rule1_variance_target(post, delta);
  std::size_t best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < post.draws.size(); ++j) {
    double gap = std::fabs(gn_variance(post.draws[j]) - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = j;
    }
  }
  return post.draws[best];
}

// Rule 2: probabilistic calibration. For each candidate j, T_j is the
// (1-delta) empirical quantile of the Kolmogorov distances to the other
// draws; returns argmin_j T_j (ties to the smaller index). When more than
// 500 rivals exist, 500 are subsampled per candidate from a seeded stream.
inline GNParams select_rule2(const GNPosterior& post, double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("delta outside (0,1)");
  const std::size_t K = post.draws.size();
  if (K < 2) throw std::invalid_argument("rule 2 needs at least 2 draws");
  constexpr std::size_t kMaxRivals = 500;

  double best_t = std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  std::vector<std::size_t> rivals;
  std::vector<double> dist;
  for (std::size_t j = 0; j < K; ++j) {
    rivals.clear();
    for (std::size_t i = 0; i < K; ++i)
      if (i != j) rivals.push_back(i);
    if (rivals.size() > kMaxRivals) {
      Rng rng(derive_seed(post.seed, role::rule2, j));
      for (std::size_t k = 0; k < kMaxRivals; ++k) {
        std::size_t pick = k + rng.below(rivals.size() - k);
        std::swap(rivals[k], rivals[pick]);
      }
      rivals.resize(kMaxRivals);
    }
    dist.clear();
    for (std::size_t i : rivals)
      dist.push_back(gn_kolmogorov(post.draws[i], post.draws[j]));
    std::sort(dist.begin(), dist.end());
    double tj = dist[detail::quantile_index(1.0 - delta, dist.size())];
    if (tj < best_t) {
      best_t = tj;
      best = j;
    }
  }
  return post.draws[best];
}

// Smooth predictive: GN law for the standardized residual around the GP
// posterior at x. Degenerates to a point mass when the posterior sd is 0.
struct BcrPredictive {
  Posterior gp_posterior;
  GNParams selected;

  double cdf(double z) const {
    if (gp_posterior.sd == 0.0) return z >= gp_posterior.mean ? 1.0 : 0.0;
    return gn_cdf(selected, (z - gp_posterior.mean) / gp_posterior.sd);
  }

  double pdf(double z) const {
    if (gp_posterior.sd == 0.0)
      return z == gp_posterior.mean
                 ? std::numeric_limits<double>::infinity()
                 : 0.0;
    return gn_pdf(selected, (z - gp_posterior.mean) / gp_posterior.sd) /
           gp_posterior.sd;
  }

  double quantile(double p) const {
    if (gp_posterior.sd == 0.0) return gp_posterior.mean;
    return gp_posterior.mean + gp_posterior.sd * gn_quantile(selected, p);
  }
};

inline BcrPredictive bcr_predictive(const FittedGP& gp,
                                    const Eigen::VectorXd& x,
                                    const GNParams& theta_star) {
  theta_star.validate();
  return BcrPredictive{gp.posterior(x), theta_star};
}

}  // namespace gpcal
