#pragma once

// Jackknife+ interval for GP interpolation. Delete-one means and sds at the
// prediction point come from rank-one downdates of the cached inverse; the
// residual radii use the standardized LOO magnitudes by default (raw
// magnitudes behind a flag).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gpcal/cps.hpp"
#include "gpcal/gp.hpp"

namespace gpcal {

struct JackknifeScores {
  Eigen::VectorXd loo_means;  // m_{n,-i}(x)
  Eigen::VectorXd loo_sds;    // sigma_{n,-i}(x)
  Eigen::VectorXd radii;      // |R_{n,-i}| standardized LOO magnitudes
};

// Delete-one posterior at x via the Schur identities
//   m_{n,-i}(x) = m_n(x) - u_i w_i / kbar_i,
//   sigma_{n,-i}^2(x) = sigma_n^2(x) + u_i^2 / kbar_i,
// with u = K^{-1} k(x), w = K^{-1}(z - m 1), kbar = diag(K^{-1}).
inline JackknifeScores jackknife_scores(const FittedGP& gp,
                                        const Eigen::VectorXd& x) {
  PosteriorDetail post = gp.posterior_detail(x);
  const Eigen::VectorXd& w = gp.alpha();
  const Eigen::VectorXd& kbar = gp.diag_inv();
  JackknifeScores out;
  out.loo_means =
      (post.mean - post.u.array() * w.array() / kbar.array()).matrix();
  out.loo_sds =
      (post.var + post.u.array().square() / kbar.array()).sqrt().matrix();
  out.radii = (w.array().abs() / kbar.array().sqrt()).matrix();
  return out;
}

inline PredictionInterval jackknife_plus_interval(const FittedGP& gp,
                                                  const Eigen::VectorXd& x,
                                                  double alpha,
                                                  bool standardized = true) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha outside (0,1)");
  const auto n = gp.dataset().n();
  JackknifeScores sc = jackknife_scores(gp, x);

  Eigen::VectorXd radius(n);
  if (standardized) {
    radius = sc.radii.array() * sc.loo_sds.array();
  } else {
    LooMoments loo = gp.loo();
    radius = (gp.dataset().responses - loo.means).array().abs();
  }

  std::vector<double> lo_scores(n), hi_scores(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lo_scores[i] = sc.loo_means[i] - radius[i];
    hi_scores[i] = sc.loo_means[i] + radius[i];
  }
  std::sort(lo_scores.begin(), lo_scores.end());
  std::sort(hi_scores.begin(), hi_scores.end());

  const double inf = std::numeric_limits<double>::infinity();
  auto r_lo = static_cast<Eigen::Index>(
      std::floor(alpha * static_cast<double>(n + 1)));
  auto r_hi = static_cast<Eigen::Index>(
      std::ceil((1.0 - alpha) * static_cast<double>(n + 1)));

  PredictionInterval out;
  out.level = 1.0 - alpha;
  out.closed_left = true;
  out.open_right = false;
  out.lower = r_lo >= 1 ? lo_scores[r_lo - 1] : -inf;
  out.upper = r_hi <= n ? hi_scores[r_hi - 1] : inf;
  return out;
}

}  // namespace gpcal
