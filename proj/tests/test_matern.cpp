#include <gtest/gtest.h>

#include <cmath>

#include <gpcal/matern.hpp>
#include <gpcal/rng.hpp>

namespace {

using gpcal::KernelParams;
using gpcal::matern_correlation;
using gpcal::matern_kernel;

KernelParams iso_params(int d, double variance, double rho, int p) {
  KernelParams kp;
  kp.mean = 0.0;
  kp.variance = variance;
  kp.lengthscales = Eigen::VectorXd::Constant(d, rho);
  kp.regularity = p;
  return kp;
}

// Reference half-integer Matern correlation through the modified Bessel
// function: kappa_nu(h) = 2^{1-nu}/Gamma(nu) (sqrt(2 nu) h)^nu K_nu(...).
double bessel_matern(double h, int p) {
  if (h == 0.0) return 1.0;
  double nu = p + 0.5;
  double t = std::sqrt(2.0 * nu) * h;
  return 2.0 / std::tgamma(nu) * std::pow(0.5 * t, nu) * std::cyl_bessel_k(nu, t);
}

TEST(Matern, CoincidentPointsReturnVariance) {
  gpcal::Rng rng(11);
  for (int p = 0; p <= 3; ++p) {
    KernelParams kp =
        iso_params(3, rng.uniform(0.5, 2.0), rng.uniform(0.1, 1.0), p);
    Eigen::VectorXd x(3);
    for (int j = 0; j < 3; ++j) x[j] = rng.uniform();
    EXPECT_EQ(matern_kernel(x, x, kp), kp.variance);
  }
}

TEST(Matern, ExponentialClosedFormAtUnitDistance) {
  KernelParams kp = iso_params(1, 1.0, 1.0, 0);
  Eigen::VectorXd x(1), y(1);
  x << 0.25;
  y << 1.25;
  EXPECT_NEAR(matern_kernel(x, y, kp), std::exp(-1.0), 1e-15);
}

TEST(Matern, FrozenFiveHalvesValue) {
  // kappa_{5/2}(1/2) = (1 + t + t^2/3) exp(-t) with t = sqrt(5)/2.
  EXPECT_NEAR(matern_correlation(2, 0.5), 0.8286491424181253, 1e-12);
}

TEST(Matern, MatchesBesselOracle) {
  for (int p = 0; p <= 3; ++p)
    for (double h = 0.05; h <= 3.0; h += 0.05)
      EXPECT_NEAR(matern_correlation(p, h), bessel_matern(h, p), 1e-12)
          << "p=" << p << " h=" << h;
}

TEST(Matern, SymmetricExactly) {
  gpcal::Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    KernelParams kp = iso_params(2, 1.3, 0.4, rep % 4);
    Eigen::VectorXd x(2), y(2);
    for (int j = 0; j < 2; ++j) {
      x[j] = rng.uniform();
      y[j] = rng.uniform();
    }
    EXPECT_EQ(matern_kernel(x, y, kp), matern_kernel(y, x, kp));
  }
}

TEST(Matern, AnisotropicLengthscales) {
  KernelParams kp;
  kp.mean = 0.0;
  kp.variance = 1.7;
  kp.lengthscales = Eigen::VectorXd(2);
  kp.lengthscales << 0.3, 0.7;
  kp.regularity = 1;
  Eigen::VectorXd x(2), y(2);
  x << 0.2, 0.9;
  y << 0.5, 0.1;
  double h = std::sqrt(std::pow((0.2 - 0.5) / 0.3, 2) +
                       std::pow((0.9 - 0.1) / 0.7, 2));
  EXPECT_NEAR(matern_kernel(x, y, kp), 1.7 * matern_correlation(1, h), 1e-15);
  EXPECT_NEAR(gpcal::scaled_distance(x, y, kp.lengthscales), h, 1e-15);
}

TEST(Matern, ValidationErrors) {
  KernelParams kp = iso_params(2, 1.0, 0.5, 1);
  kp.variance = 0.0;
  EXPECT_THROW(kp.validate(), std::invalid_argument);
  kp = iso_params(2, 1.0, 0.5, 1);
  kp.lengthscales[1] = -0.1;
  EXPECT_THROW(kp.validate(), std::invalid_argument);
  kp = iso_params(2, 1.0, 0.5, 1);
  kp.regularity = -1;
  EXPECT_THROW(kp.validate(), std::invalid_argument);

  Eigen::VectorXd x(2), y(3);
  x.setZero();
  y.setZero();
  EXPECT_THROW(matern_kernel(x, y, iso_params(2, 1.0, 0.5, 1)),
               std::invalid_argument);
}

}  // namespace
