#include <gtest/gtest.h>

#include <cmath>
#include <gpcal/gpcal.hpp>
#include <vector>

using namespace gpcal;

TEST(GnParams, ValidationRejectsBadValues) {
  EXPECT_THROW(GNParams({0.0, 1.0}).validate(), std::invalid_argument);
  EXPECT_THROW(GNParams({-1.0, 1.0}).validate(), std::invalid_argument);
  EXPECT_THROW(GNParams({2.0, 0.0}).validate(), std::invalid_argument);
  EXPECT_THROW(GNParams({2.0, -0.5}).validate(), std::invalid_argument);
  EXPECT_NO_THROW(GNParams({0.3, 2.5}).validate());
}

TEST(GnCdf, GaussianMemberMatchesErfc) {
  // GN(2, 0, lambda) is N(0, lambda^2/2), so F(z) = erfc(-z/lambda)/2.
  for (double lambda : {0.7, 1.0, 2.3}) {
    GNParams p{2.0, lambda};
    for (double z = -5.0; z <= 5.0; z += 0.25) {
      double want = 0.5 * std::erfc(-z / lambda);
      EXPECT_NEAR(gn_cdf(p, z), want, 1e-10) << "lambda " << lambda << " z " << z;
    }
  }
}

TEST(GnCdf, LaplaceClosedForm) {
  GNParams unit{1.0, 1.0};
  EXPECT_NEAR(gn_cdf(unit, 1.0), 0.81606027941427884, 1e-13);
  EXPECT_NEAR(gn_cdf(unit, -1.0), 1.0 - 0.81606027941427884, 1e-13);
  for (double lambda : {0.5, 1.0, 3.0}) {
    GNParams p{1.0, lambda};
    for (double z : {0.0, 0.2, 1.0, 2.7, 6.0}) {
      double want = 1.0 - 0.5 * std::exp(-z / lambda);
      EXPECT_NEAR(gn_cdf(p, z), want, 1e-13);
      EXPECT_NEAR(gn_cdf(p, -z), 1.0 - want, 1e-13);
    }
  }
}

TEST(GnCdf, SymmetryAndMonotonicity) {
  for (double beta : {0.4, 1.0, 2.0, 5.5}) {
    GNParams p{beta, 1.3};
    EXPECT_DOUBLE_EQ(gn_cdf(p, 0.0), 0.5);
    double prev = -1.0;
    for (double z = -8.0; z <= 8.0; z += 0.1) {
      double f = gn_cdf(p, z);
      EXPECT_NEAR(f + gn_cdf(p, -z), 1.0, 1e-14);
      EXPECT_GE(f, prev);
      prev = f;
    }
  }
}

TEST(GnQuantile, InvertsCdf) {
  for (double beta : {0.7, 1.0, 2.0, 4.0}) {
    for (double lambda : {0.5, 1.0, 2.0}) {
      GNParams p{beta, lambda};
      for (double prob : {0.001, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999}) {
        double q = gn_quantile(p, prob);
        EXPECT_NEAR(gn_cdf(p, q), prob, 1e-9);
      }
      for (double s : {-1.2, -0.6, -0.1, 0.1, 0.6, 1.2}) {
        double z = s * lambda;
        double q = gn_quantile(p, gn_cdf(p, z));
        EXPECT_NEAR(q, z, 1e-8 * (1.0 + std::fabs(z)));
      }
    }
  }
  GNParams p{2.0, 1.0};
  EXPECT_EQ(gn_quantile(p, 0.5), 0.0);
  EXPECT_THROW(gn_quantile(p, 0.0), std::invalid_argument);
  EXPECT_THROW(gn_quantile(p, 1.0), std::invalid_argument);
  EXPECT_THROW(gn_quantile(p, -0.1), std::invalid_argument);
}

TEST(GnPdf, ConsistentWithCdfByQuadrature) {
  for (double beta : {0.8, 2.0, 3.5}) {
    GNParams p{beta, 1.4};
    EXPECT_NEAR(gn_pdf(p, 0.7), std::exp(gn_log_pdf(p, 0.7)), 1e-15);
    for (double z : {0.3, 1.0, 2.5}) {
      double integral = detail::adaptive_simpson(
          [&](double t) { return gn_pdf(p, t); }, 0.0, z, 1e-13);
      EXPECT_NEAR(integral, gn_cdf(p, z) - 0.5, 1e-10);
    }
  }
}

TEST(GnVariance, ClosedFormMembers) {
  for (double lambda : {0.5, 1.0, 2.0}) {
    EXPECT_NEAR(gn_variance({1.0, lambda}), 2.0 * lambda * lambda,
                1e-12 * lambda * lambda);
    EXPECT_NEAR(gn_variance({2.0, lambda}), 0.5 * lambda * lambda,
                1e-12 * lambda * lambda);
  }
  EXPECT_NEAR(gn_variance({0.7, 1.0}), 9.8049527322169141, 1e-10 * 9.8);
  EXPECT_NEAR(gn_variance({4.0, 1.0}), 0.33798912003364236, 1e-12);
}

TEST(GnSample, MomentsMatchTheory) {
  struct Case {
    double beta, lambda;
  };
  for (Case c : {Case{0.7, 1.3}, Case{3.0, 0.6}}) {
    GNParams p{c.beta, c.lambda};
    Rng rng(99);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
    for (int i = 0; i < n; ++i) {
      double z = gn_sample(p, rng);
      sum += z;
      sum2 += z * z;
      sum4 += z * z * z * z;
    }
    double mean = sum / n, m2 = sum2 / n, m4 = sum4 / n;
    double var = gn_variance(p);
    double se_mean = std::sqrt(var / n);
    double se_var = std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
    EXPECT_NEAR(mean, 0.0, 3.0 * se_mean) << "beta " << c.beta;
    EXPECT_NEAR(m2 - mean * mean, var, 3.0 * se_var) << "beta " << c.beta;
  }
}

TEST(GnMeanAbs, GaussianOracle) {
  // For GN(2, 0, lambda) = N(0, s^2) with s = lambda/sqrt(2):
  //   E|Z - y| = s sqrt(2/pi) exp(-y^2/(2 s^2)) + y erf(y/(s sqrt(2))).
  for (double lambda : {1.0, 2.2}) {
    GNParams p{2.0, lambda};
    double s = lambda / std::sqrt(2.0);
    for (double y : {0.0, 0.3, 1.0, 2.7, -1.4}) {
      double want = s * std::sqrt(2.0 / M_PI) * std::exp(-y * y / (2 * s * s)) +
                    y * std::erf(y / (s * std::sqrt(2.0)));
      EXPECT_NEAR(gn_mean_abs(p, y), want, 1e-12 * (1.0 + std::fabs(want)));
    }
  }
}

TEST(GnMeanAbs, LaplaceOracle) {
  for (double lambda : {0.8, 1.0, 2.5}) {
    GNParams p{1.0, lambda};
    for (double y : {0.0, 0.4, 1.7, -2.3, 5.0}) {
      double want = lambda * std::exp(-std::fabs(y) / lambda) + std::fabs(y);
      EXPECT_NEAR(gn_mean_abs(p, y), want, 1e-12 * (1.0 + want));
    }
  }
}

TEST(GnMeanAbs, CenterValueGammaRatio) {
  for (double beta : {0.6, 0.7, 1.3, 3.7}) {
    for (double lambda : {1.0, 1.9}) {
      double want = lambda * std::exp(std::lgamma(2.0 / beta) -
                                      std::lgamma(1.0 / beta));
      EXPECT_NEAR(gn_mean_abs({beta, lambda}, 0.0), want, 1e-12 * want);
    }
  }
  EXPECT_NEAR(gn_mean_abs({0.7, 1.0}, 0.0), 1.9865110254607322, 1e-12 * 2.0);
  EXPECT_NEAR(gn_mean_abs({2.0, 1.0}, 0.0), 0.56418958354775629, 1e-13);
}

TEST(GnMeanAbs, MonteCarloCrossCheck) {
  struct Case {
    double beta, lambda, y;
  };
  for (Case c : {Case{0.6, 1.0, 0.9}, Case{3.7, 1.5, -0.4}}) {
    GNParams p{c.beta, c.lambda};
    Rng rng(4242);
    const int n = 400000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      double a = std::fabs(gn_sample(p, rng) - c.y);
      sum += a;
      sum2 += a * a;
    }
    double mean = sum / n;
    double se = std::sqrt(std::max(sum2 / n - mean * mean, 0.0) / n);
    EXPECT_NEAR(gn_mean_abs(p, c.y), mean, 3.0 * se) << "beta " << c.beta;
  }
}

TEST(GnMeanAbs, DominatedByDistanceForFarPoints) {
  GNParams p{1.6, 1.1};
  double ez = gn_mean_abs(p, 0.0);
  double prev = ez;
  for (double y : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    double v = gn_mean_abs(p, y);
    EXPECT_GE(v, y);
    EXPECT_LE(v, y + ez + 1e-12);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(GnDispersion, ExactMembers) {
  EXPECT_DOUBLE_EQ(gn_dispersion(1.0), 1.5);
  EXPECT_DOUBLE_EQ(gn_dispersion(2.0), std::sqrt(2.0 / M_PI));
}

TEST(GnDispersion, FrozenQuadratureValues) {
  // Endpoints sit exactly on table nodes, interior betas are interpolated.
  EXPECT_NEAR(gn_dispersion(0.2), 27524.970703125, 1e-8 * 27525.0);
  EXPECT_NEAR(gn_dispersion(10.0), 0.64718205319155033, 1e-8);
  EXPECT_NEAR(gn_dispersion(0.3), 242.80181008054575, 2e-4 * 242.8);
  EXPECT_NEAR(gn_dispersion(0.5), 9.75, 2e-4 * 9.75);
  EXPECT_NEAR(gn_dispersion(1.3), 1.0819009340514031, 2e-4);
  EXPECT_NEAR(gn_dispersion(4.0), 0.66790753537341263, 2e-4);
}

TEST(GnDispersion, RefusesOutOfRangeBeta) {
  EXPECT_THROW(gn_dispersion(0.1), std::domain_error);
  EXPECT_THROW(gn_dispersion(0.19), std::domain_error);
  EXPECT_THROW(gn_dispersion(10.5), std::domain_error);
  EXPECT_THROW(gn_dispersion(11.0), std::domain_error);
  EXPECT_NO_THROW(gn_dispersion(0.2));
  EXPECT_NO_THROW(gn_dispersion(10.0));
}

TEST(GnDispersion, SelfDispersionScalesLinearly) {
  for (double beta : {0.5, 1.0, 2.6}) {
    for (double lambda : {0.3, 1.0, 4.7}) {
      EXPECT_DOUBLE_EQ(gn_self_dispersion({beta, lambda}),
                       lambda * gn_dispersion(beta));
    }
  }
}

TEST(GnDispersion, MonteCarloCrossCheck) {
  for (double beta : {1.3, 3.3}) {
    GNParams p{beta, 1.0};
    Rng rng(777);
    const int n = 300000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      double a = std::fabs(gn_sample(p, rng) - gn_sample(p, rng));
      sum += a;
      sum2 += a * a;
    }
    double mean = sum / n;
    double se = std::sqrt(std::max(sum2 / n - mean * mean, 0.0) / n);
    EXPECT_NEAR(gn_dispersion(beta), mean, 3.0 * se) << "beta " << beta;
  }
}

namespace {

// Grid oracle: sup_z |F_a(z) - F_b(z)| scanned through quantiles of b.
double ks_grid_oracle(const GNParams& a, const GNParams& b) {
  double best = 0.0;
  const int m = 200000;
  for (int k = 1; k < m; ++k) {
    double prob = static_cast<double>(k) / m;
    double z = gn_quantile(b, prob);
    best = std::max(best, std::fabs(gn_cdf(a, z) - prob));
  }
  return best;
}

}  // namespace

TEST(GnKolmogorov, IdenticalLawsGiveZero) {
  EXPECT_EQ(gn_kolmogorov({2.0, 1.0}, {2.0, 1.0}), 0.0);
  EXPECT_EQ(gn_kolmogorov({0.7, 3.2}, {0.7, 3.2}), 0.0);
}

TEST(GnKolmogorov, SymmetricInArguments) {
  GNParams a{0.9, 1.0}, b{2.4, 1.7};
  EXPECT_NEAR(gn_kolmogorov(a, b), gn_kolmogorov(b, a), 1e-12);
}

TEST(GnKolmogorov, MatchesDenseGridOracle) {
  struct Pair {
    GNParams a, b;
  };
  std::vector<Pair> pairs = {
      {{0.7, 1.0}, {2.0, 1.0}},  {{1.0, 1.0}, {1.0, 1.8}},
      {{2.0, 1.0}, {4.0, 0.6}},  {{0.5, 2.0}, {3.0, 1.5}},
      {{2.0, 1.0}, {2.2, 1.05}}, {{9.0, 1.0}, {10.0, 1.04}},
  };
  for (const Pair& pr : pairs) {
    double got = gn_kolmogorov(pr.a, pr.b);
    double grid = ks_grid_oracle(pr.a, pr.b);
    EXPECT_GE(got, grid - 1e-9) << pr.a.shape << "," << pr.b.shape;
    EXPECT_LE(got, grid + 1e-6) << pr.a.shape << "," << pr.b.shape;
    EXPECT_GT(got, 0.0);
    EXPECT_LT(got, 1.0);
  }
}
