#pragma once

// Half-integer Matern correlation and the anisotropic kernel.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace gpcal {

struct KernelParams {
  double mean = 0.0;
  double variance = 1.0;
  Eigen::VectorXd lengthscales;  // rho_1..rho_d, all > 0
  int regularity = 2;            // p, nu = p + 1/2

  void validate() const {
    if (!(variance > 0.0)) throw std::invalid_argument("variance must be > 0");
    if (regularity < 0) throw std::invalid_argument("regularity must be >= 0");
    for (Eigen::Index j = 0; j < lengthscales.size(); ++j)
      if (!(lengthscales[j] > 0.0))
        throw std::invalid_argument("lengthscales must be > 0");
  }
};

// kappa_{p+1/2}(h) = exp(-t) * p!/(2p)! * sum_{i=0}^{p} (p+i)!/(i!(p-i)!) (2t)^{p-i},
// t = sqrt(2p+1) h.  p = 0 gives exp(-h), p = 2 the familiar Matern 5/2.
inline double matern_correlation(int regularity, double h) {
  if (regularity < 0) throw std::invalid_argument("regularity must be >= 0");
  if (h < 0.0) throw std::invalid_argument("distance must be >= 0");
  if (h == 0.0) return 1.0;
  const int p = regularity;
  const double t = std::sqrt(2.0 * p + 1.0) * h;
  if (p == 0) return std::exp(-t);
  double coeff = 1.0;  // (p+i)!/(i!(p-i)!) at i = 0
  double sum = std::pow(2.0 * t, p);
  for (int i = 0; i < p; ++i) {
    coeff *= static_cast<double>((p + i + 1) * (p - i)) / (i + 1);
    sum += coeff * std::pow(2.0 * t, p - i - 1);
  }
  double front = 1.0;  // p!/(2p)!
  for (int k = p + 1; k <= 2 * p; ++k) front /= k;
  return std::exp(-t) * front * sum;
}

// Anisotropic scaled distance h^2 = sum_j (x_j - y_j)^2 / rho_j^2.
inline double scaled_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& lengthscales) {
  if (x.size() != y.size() || x.size() != lengthscales.size())
    throw std::invalid_argument("dimension mismatch");
  double h2 = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    double r = (x[j] - y[j]) / lengthscales[j];
    h2 += r * r;
  }
  return std::sqrt(h2);
}

inline double matern_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            const KernelParams& params) {
  double h = scaled_distance(x, y, params.lengthscales);
  return params.variance * matern_correlation(params.regularity, h);
}

}  // namespace gpcal
