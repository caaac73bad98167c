#pragma once

// Gaussian-process interpolation engine: Gram assembly, Cholesky caching with
// jitter escalation, kriging posterior, fast leave-one-out identities, and
// profiled maximum-likelihood selection of the lengthscales.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gpcal/matern.hpp"
#include "gpcal/rng.hpp"

namespace gpcal {

struct Dataset {
  Eigen::MatrixXd points;                      // n x d
  Eigen::VectorXd responses;                   // n
  std::vector<std::array<double, 2>> domain;   // d pairs [lo, hi]

  Eigen::Index n() const { return points.rows(); }
  Eigen::Index d() const { return points.cols(); }

  void validate() const {
    if (points.rows() != responses.size())
      throw std::invalid_argument("points/responses length mismatch");
    if (points.rows() < 1) throw std::invalid_argument("need at least 1 point");
    if (static_cast<Eigen::Index>(domain.size()) != points.cols())
      throw std::invalid_argument("domain dimension mismatch");
    for (Eigen::Index i = 0; i < points.rows(); ++i)
      for (Eigen::Index j = 0; j < points.cols(); ++j)
        if (points(i, j) < domain[j][0] || points(i, j) > domain[j][1])
          throw std::invalid_argument("point outside domain box");
    for (Eigen::Index i = 0; i < points.rows(); ++i)
      for (Eigen::Index k = i + 1; k < points.rows(); ++k)
        if ((points.row(i) - points.row(k)).norm() == 0.0)
          throw std::invalid_argument("design points must be pairwise distinct");
  }
};

struct Posterior {
  double mean = 0.0;
  double sd = 0.0;
};

// Posterior pieces reused by the conformal thresholds and jackknife+:
// var = sigma_n^2(x), u = K_n^{-1} k_*(x).
struct PosteriorDetail {
  double mean = 0.0;
  double var = 0.0;
  Eigen::VectorXd u;
};

struct LooMoments {
  Eigen::VectorXd means;      // m_{n,-i}(X_i)
  Eigen::VectorXd sds;        // sigma_{n,-i}(X_i)
  Eigen::VectorXd residuals;  // (Z_i - m_{n,-i}) / sigma_{n,-i}
};

namespace detail {

// Cholesky with jitter escalation. First attempt is exact; on numerical
// failure the diagonal is lifted by 1e-10*scale, escalating x10 up to
// 1e-6*scale.
inline Eigen::MatrixXd factor_spd(const Eigen::MatrixXd& K, double scale,
                                  double* jitter_used) {
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd A = K;
    if (jitter > 0.0) A.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd L = llt.matrixL();
      if (L.diagonal().minCoeff() > 0.0 && L.allFinite()) {
        if (jitter_used) *jitter_used = jitter;
        return L;
      }
    }
    if (jitter == 0.0) {
      jitter = 1e-10 * scale;
    } else if (jitter < 1e-6 * scale * 0.999) {
      jitter *= 10.0;
    } else {
      throw std::runtime_error(
          "Gram matrix numerically singular; jitter escalation exhausted");
    }
  }
}

inline Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& X,
                                   const KernelParams& params) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = params.variance;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double v = matern_kernel(X.row(i).transpose(), X.row(j).transpose(), params);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

}  // namespace detail

class FittedGP {
 public:
  FittedGP(Dataset dataset, KernelParams params)
      : dataset_(std::move(dataset)), params_(std::move(params)) {
    dataset_.validate();
    params_.validate();
    if (params_.lengthscales.size() != dataset_.d())
      throw std::invalid_argument("lengthscale dimension mismatch");
    Eigen::MatrixXd K = detail::gram_matrix(dataset_.points, params_);
    chol_ = detail::factor_spd(K, params_.variance, &jitter_);
    Eigen::VectorXd zc =
        dataset_.responses.array() - params_.mean;
    alpha_ = chol_.triangularView<Eigen::Lower>().solve(zc);
    chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
    Eigen::MatrixXd linv = chol_.triangularView<Eigen::Lower>().solve(
        Eigen::MatrixXd::Identity(dataset_.n(), dataset_.n()));
    diag_inv_ = linv.colwise().squaredNorm();
    if (diag_inv_.minCoeff() <= 0.0) {
      double dmax = chol_.diagonal().maxCoeff();
      double dmin = std::max(chol_.diagonal().minCoeff(), DBL_MIN);
      throw std::runtime_error(
          "Gram matrix numerically singular (condition estimate " +
          std::to_string((dmax / dmin) * (dmax / dmin)) + ")");
    }
  }

  const Dataset& dataset() const { return dataset_; }
  const KernelParams& params() const { return params_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  const Eigen::VectorXd& diag_inv() const { return diag_inv_; }
  double jitter() const { return jitter_; }

  Eigen::VectorXd kernel_vector(const Eigen::VectorXd& x) const {
    const Eigen::Index n = dataset_.n();
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i)
      k[i] = matern_kernel(x, dataset_.points.row(i).transpose(), params_);
    return k;
  }

  PosteriorDetail posterior_detail(const Eigen::VectorXd& x) const {
    if (x.size() != dataset_.d())
      throw std::invalid_argument("prediction point dimension mismatch");
    Eigen::VectorXd k = kernel_vector(x);
    PosteriorDetail out;
    Eigen::VectorXd u = chol_.triangularView<Eigen::Lower>().solve(k);
    double kKk = u.squaredNorm();
    chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(u);
    out.u = std::move(u);
    out.mean = params_.mean + k.dot(alpha_);
    double var = params_.variance - kKk;
    if (var < -1e-10 * params_.variance)
      throw std::runtime_error("posterior variance < 0 beyond round-off tolerance");
    // Snap machine-noise variances to an exact zero so design points report
    // sd = 0 (the cancellation above bottoms out near eps * variance).
    out.var = var <= 1e-15 * params_.variance ? 0.0 : var;
    return out;
  }

  Posterior posterior(const Eigen::VectorXd& x) const {
    PosteriorDetail d = posterior_detail(x);
    return Posterior{d.mean, std::sqrt(d.var)};
  }

  // Closed-form delete-one moments at the design points:
  //   m_{n,-i}(X_i) = Z_i - w_i / kbar_i,  sigma_{n,-i}(X_i) = 1/sqrt(kbar_i),
  // with w = K_n^{-1}(z - m 1) and kbar = diag(K_n^{-1}).
  LooMoments loo() const {
    if (dataset_.n() < 3) throw std::invalid_argument("LOO needs n >= 3");
    LooMoments out;
    out.means = dataset_.responses.array() - (alpha_.array() / diag_inv_.array());
    out.sds = diag_inv_.array().rsqrt();
    out.residuals = alpha_.array() / diag_inv_.array().sqrt();
    return out;
  }

 private:
  Dataset dataset_;
  KernelParams params_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd diag_inv_;
  double jitter_ = 0.0;
};

inline Eigen::VectorXd loo_residuals(const FittedGP& gp) {
  return gp.loo().residuals;
}

namespace detail {

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  bool converged = false;
};

template <class F>
NelderMeadResult nelder_mead(F&& f, const Eigen::VectorXd& x0, double step,
                             int max_iter, double ftol) {
  const int d = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> pts(d + 1, x0);
  std::vector<double> vals(d + 1);
  for (int j = 0; j < d; ++j) pts[j + 1][j] += step;
  for (int j = 0; j <= d; ++j) vals[j] = f(pts[j]);

  auto order = [&] {
    std::vector<int> idx(d + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return vals[a] < vals[b]; });
    std::vector<Eigen::VectorXd> p2(d + 1);
    std::vector<double> v2(d + 1);
    for (int j = 0; j <= d; ++j) {
      p2[j] = pts[idx[j]];
      v2[j] = vals[idx[j]];
    }
    pts.swap(p2);
    vals.swap(v2);
  };

  NelderMeadResult res;
  for (int it = 0; it < max_iter; ++it) {
    order();
    if (vals[d] - vals[0] < ftol * (1.0 + std::fabs(vals[0]))) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (int j = 0; j < d; ++j) centroid += pts[j];
    centroid /= d;

    Eigen::VectorXd xr = centroid + (centroid - pts[d]);
    double fr = f(xr);
    if (fr < vals[0]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[d]);
      double fe = f(xe);
      if (fe < fr) {
        pts[d] = xe;
        vals[d] = fe;
      } else {
        pts[d] = xr;
        vals[d] = fr;
      }
    } else if (fr < vals[d - 1]) {
      pts[d] = xr;
      vals[d] = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (pts[d] - centroid);
      double fc = f(xc);
      if (fc < vals[d]) {
        pts[d] = xc;
        vals[d] = fc;
      } else {
        for (int j = 1; j <= d; ++j) {
          pts[j] = pts[0] + 0.5 * (pts[j] - pts[0]);
          vals[j] = f(pts[j]);
        }
      }
    }
  }
  order();
  res.x = pts[0];
  res.f = vals[0];
  return res;
}

}  // namespace detail

struct FitResult {
  KernelParams params;
  bool converged = false;
  double nll = 0.0;
};

// Profiled Gaussian log marginal likelihood: the GLS mean and the closed-form
// variance are eliminated analytically; the log-lengthscales are optimized by
// Nelder-Mead with 8 restarts from a seeded midpoint Latin hypercube over
// [log(0.05 range_j), log(2 range_j)].
inline FitResult fit_ml(const Dataset& dataset, int regularity,
                        std::uint64_t seed) {
  dataset.validate();
  if (regularity < 0) throw std::invalid_argument("regularity must be >= 0");
  const Eigen::Index n = dataset.n();
  const Eigen::Index d = dataset.d();
  const Eigen::VectorXd& z = dataset.responses;
  const double var_z =
      (z.array() - z.mean()).square().sum() / static_cast<double>(n);
  const double s2_floor = std::max(1e-12 * var_z, DBL_MIN);

  Eigen::VectorXd lo(d), hi(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double range = dataset.domain[j][1] - dataset.domain[j][0];
    if (range <= 0.0)
      range = std::max(dataset.points.col(j).maxCoeff() -
                           dataset.points.col(j).minCoeff(),
                       1e-6);
    lo[j] = std::log(0.05 * range);
    hi[j] = std::log(2.0 * range);
  }

  struct Profile {
    double mean, s2, nll;
  };
  auto profile_at = [&](const Eigen::VectorXd& t) -> Profile {
    KernelParams kp;
    kp.mean = 0.0;
    kp.variance = 1.0;
    kp.regularity = regularity;
    kp.lengthscales = t.array().exp();
    Eigen::MatrixXd C = detail::gram_matrix(dataset.points, kp);
    Eigen::MatrixXd L = detail::factor_spd(C, 1.0, nullptr);
    Eigen::VectorXd y1 = L.triangularView<Eigen::Lower>().solve(z);
    Eigen::VectorXd y0 = L.triangularView<Eigen::Lower>().solve(
        Eigen::VectorXd::Ones(n));
    double mhat = y0.dot(y1) / y0.squaredNorm();
    double s2 = std::max((y1 - mhat * y0).squaredNorm() / n, s2_floor);
    double nll = 0.5 * n * std::log(s2) + L.diagonal().array().log().sum();
    return Profile{mhat, s2, nll};
  };
  // Restarts live on the [lo, hi] grid; the optimizer itself may roam well
  // past it, with a soft barrier only against degenerate extremes.
  const double slack_lo = std::log(25.0), slack_hi = std::log(2.5);
  auto objective = [&](const Eigen::VectorXd& t) -> double {
    double penalty = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      double below = (lo[j] - slack_lo) - t[j], above = t[j] - (hi[j] + slack_hi);
      if (below > 0.0) penalty += 1e4 * below * below;
      if (above > 0.0) penalty += 1e4 * above * above;
    }
    return profile_at(t).nll + penalty;
  };

  constexpr int kRestarts = 8;
  Rng rng(derive_seed(seed, hash64("fit_ml")));
  std::vector<std::vector<int>> perms(d, std::vector<int>(kRestarts));
  for (Eigen::Index j = 0; j < d; ++j) {
    std::iota(perms[j].begin(), perms[j].end(), 0);
    for (int k = kRestarts - 1; k > 0; --k)
      std::swap(perms[j][k], perms[j][rng.below(k + 1)]);
  }

  bool any_converged = false;
  double best_f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_t = 0.5 * (lo + hi);
  for (int k = 0; k < kRestarts; ++k) {
    Eigen::VectorXd t0(d);
    for (Eigen::Index j = 0; j < d; ++j)
      t0[j] = lo[j] + (hi[j] - lo[j]) * (perms[j][k] + 0.5) / kRestarts;
    auto nm = detail::nelder_mead(objective, t0, 0.4, 200 + 100 * static_cast<int>(d),
                                  1e-10);
    any_converged = any_converged || nm.converged;
    if (nm.f < best_f) {
      best_f = nm.f;
      best_t = nm.x;
    }
  }

  Profile prof = profile_at(best_t);
  FitResult out;
  out.params.mean = prof.mean;
  out.params.variance = prof.s2;
  out.params.lengthscales = best_t.array().exp();
  out.params.regularity = regularity;
  out.converged = any_converged;
  out.nll = prof.nll;
  return out;
}

}  // namespace gpcal
