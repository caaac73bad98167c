#include <gtest/gtest.h>

#include <cmath>
#include <gpcal/gpcal.hpp>
#include <memory>
#include <vector>

using namespace gpcal;

namespace {

CdfList gaussian_list(const std::vector<double>& locs, double sd) {
  CdfList out;
  for (double m : locs)
    out.push_back(std::make_unique<GnLocationScaleCdf>(
        GnLocationScaleCdf::gaussian(m, sd)));
  return out;
}

double normal_mean_abs(double m, double s, double z) {
  double t = (z - m) / s;
  return s * std::sqrt(2.0 / M_PI) * std::exp(-0.5 * t * t) +
         (z - m) * std::erf(t / std::sqrt(2.0));
}

}  // namespace

TEST(Pit, SmoothLawsUsePlainCdf) {
  CdfList cdfs = gaussian_list({0.0, 1.0, -2.0}, 0.8);
  std::vector<double> truths{0.3, 0.5, -2.0};
  PitSample pit = pit_values(cdfs, truths, 42);
  EXPECT_FALSE(pit.randomized);
  ASSERT_EQ(pit.values.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j)
    EXPECT_DOUBLE_EQ(pit.values[j], cdfs[j]->cdf(truths[j]));
}

TEST(Pit, DiracAtTruthDrawsFullUniform) {
  CdfList cdfs;
  std::vector<double> truths;
  for (int j = 0; j < 6; ++j) {
    cdfs.push_back(std::make_unique<DiracCdf>(0.25 * j));
    truths.push_back(0.25 * j);
  }
  PitSample pit = pit_values(cdfs, truths, 314);
  EXPECT_TRUE(pit.randomized);
  Rng rng(314);
  for (double v : pit.values) EXPECT_DOUBLE_EQ(v, rng.uniform());
}

TEST(Pit, OnlyJumpyLawsConsumeRandomness) {
  CdfList cdfs;
  cdfs.push_back(std::make_unique<GnLocationScaleCdf>(
      GnLocationScaleCdf::gaussian(0.0, 1.0)));
  cdfs.push_back(std::make_unique<DiracCdf>(1.0));
  cdfs.push_back(std::make_unique<GnLocationScaleCdf>(
      GnLocationScaleCdf::gaussian(2.0, 1.0)));
  cdfs.push_back(std::make_unique<DiracCdf>(3.0));
  std::vector<double> truths{0.0, 1.0, 2.0, 3.0};
  PitSample pit = pit_values(cdfs, truths, 99);
  Rng rng(99);
  EXPECT_DOUBLE_EQ(pit.values[1], rng.uniform());
  EXPECT_DOUBLE_EQ(pit.values[3], rng.uniform());
  EXPECT_DOUBLE_EQ(pit.values[0], 0.5);
  EXPECT_DOUBLE_EQ(pit.values[2], 0.5);
}

TEST(Pit, SmoothSelfSampledIsUniformAtDkwBound) {
  const int m = 4000;
  const double bound = std::sqrt(std::log(200.0) / (2.0 * m));
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    Rng rng(seed);
    CdfList cdfs;
    std::vector<double> truths;
    for (int j = 0; j < m; ++j) {
      cdfs.push_back(std::make_unique<GnLocationScaleCdf>(
          GnLocationScaleCdf::gaussian(0.3, 1.2)));
      truths.push_back(0.3 + 1.2 * rng.normal());
    }
    PitSample pit = pit_values(cdfs, truths, seed + 1000);
    EXPECT_LE(ks_pit(pit), bound) << "seed " << seed;
  }
}

TEST(KsPit, OrderStatisticHandCases) {
  PitSample staircase;
  const int m = 25;
  for (int j = 1; j <= m; ++j) staircase.values.push_back((j - 0.5) / m);
  EXPECT_NEAR(ks_pit(staircase), 0.5 / m, 1e-15);

  PitSample zeros;
  zeros.values.assign(10, 0.0);
  EXPECT_DOUBLE_EQ(ks_pit(zeros), 1.0);

  PitSample ones;
  ones.values.assign(10, 1.0);
  EXPECT_DOUBLE_EQ(ks_pit(ones), 1.0);

  PitSample trio;
  trio.values = {0.8, 0.1, 0.4};
  EXPECT_DOUBLE_EQ(ks_pit(trio), 2.0 / 3.0 - 0.4);

  PitSample empty;
  EXPECT_THROW(ks_pit(empty), std::invalid_argument);
}

TEST(VarPit, HandCasesAndLawOfLargeNumbers) {
  PitSample centered;
  centered.values.assign(7, 0.5);
  EXPECT_DOUBLE_EQ(var_pit(centered), -1.0 / 12.0);

  PitSample extremes;
  extremes.values = {0.0, 1.0};
  EXPECT_DOUBLE_EQ(var_pit(extremes), 0.25 - 1.0 / 12.0);

  PitSample big;
  Rng rng(2718);
  for (int j = 0; j < 100000; ++j) big.values.push_back(rng.uniform());
  EXPECT_NEAR(var_pit(big), 0.0, 0.005);
}

TEST(Coverage, DiracIntervalsAreClosedPoints) {
  CdfList cdfs;
  std::vector<double> truths;
  cdfs.push_back(std::make_unique<DiracCdf>(1.0));
  truths.push_back(1.0);
  cdfs.push_back(std::make_unique<DiracCdf>(2.0));
  truths.push_back(2.1);
  auto stats = coverage_and_width(cdfs, truths, {0.9});
  ASSERT_EQ(stats.size(), 1u);
  EXPECT_DOUBLE_EQ(stats[0].coverage, 0.5);
  EXPECT_DOUBLE_EQ(stats[0].mean_width, 0.0);
  EXPECT_EQ(stats[0].infinite_count, 0);
  EXPECT_DOUBLE_EQ(stats[0].level, 0.9);
}

TEST(Coverage, GaussianSelfConsistency) {
  const int m = 4000;
  Rng rng(555);
  std::vector<double> locs(m, -0.7), truths;
  for (int j = 0; j < m; ++j) truths.push_back(-0.7 + 1.2 * rng.normal());
  CdfList cdfs = gaussian_list(locs, 1.2);
  auto stats = coverage_and_width(cdfs, truths, {0.9, 0.95});
  EXPECT_NEAR(stats[0].coverage, 0.90, 0.02);
  EXPECT_NEAR(stats[1].coverage, 0.95, 0.02);
  EXPECT_NEAR(stats[0].mean_width, 2.0 * 1.6448536269514722 * 1.2, 1e-9);
  EXPECT_NEAR(stats[1].mean_width, 2.0 * 1.9599639845400545 * 1.2, 1e-9);
  EXPECT_EQ(stats[0].infinite_count, 0);
}

TEST(Coverage, StepwiseIntervalsAreHalfOpen) {
  // Thresholds 1..19, tau = 0.5: the 90% interval is [c_1, c_19) = [1, 19).
  std::vector<double> thr;
  for (int i = 1; i <= 19; ++i) thr.push_back(static_cast<double>(i));
  auto lawmaker = [&]() {
    return std::make_unique<StepwiseCdf>(StepwiseCpd(thr, 0.5));
  };
  CdfList cdfs;
  std::vector<double> truths{19.0, 18.9999, 1.0, 0.9999};
  for (std::size_t j = 0; j < truths.size(); ++j) cdfs.push_back(lawmaker());
  auto stats = coverage_and_width(cdfs, truths, {0.9});
  // Upper endpoint excluded, lower endpoint included.
  EXPECT_DOUBLE_EQ(stats[0].coverage, 0.5);
  EXPECT_DOUBLE_EQ(stats[0].mean_width, 18.0);
}

TEST(Coverage, RejectsBadLevels) {
  CdfList cdfs = gaussian_list({0.0}, 1.0);
  std::vector<double> truths{0.0};
  EXPECT_THROW(coverage_and_width(cdfs, truths, {0.0}), std::invalid_argument);
  EXPECT_THROW(coverage_and_width(cdfs, truths, {1.0}), std::invalid_argument);
  std::vector<double> bad{0.1, 0.2};
  EXPECT_THROW(coverage_and_width(cdfs, bad, {0.9}), std::invalid_argument);
}

TEST(Iae, DiracAtTruthIsExactlyHalf) {
  CdfList cdfs;
  std::vector<double> truths;
  for (int j = 0; j < 8; ++j) {
    cdfs.push_back(std::make_unique<DiracCdf>(0.3 * j));
    truths.push_back(0.3 * j);
  }
  EXPECT_NEAR(iae(cdfs, truths), 0.5, 1e-12);
}

TEST(Iae, CalibratedStaircaseNearZero) {
  const int m = 400;
  CdfList cdfs;
  std::vector<double> truths;
  for (int j = 1; j <= m; ++j) {
    auto g = GnLocationScaleCdf::gaussian(0.0, 1.0);
    truths.push_back(g.quantile((j - 0.5) / m));
    cdfs.push_back(std::make_unique<GnLocationScaleCdf>(g));
  }
  EXPECT_LE(iae(cdfs, truths), 1.0 / m + 0.005);
}

TEST(Iae, MatchesIntervalCountingOracle) {
  Rng rng(4711);
  CdfList cdfs;
  std::vector<double> truths;
  for (int j = 0; j < 37; ++j) {
    double loc = rng.uniform(-1.0, 1.0);
    cdfs.push_back(std::make_unique<GnLocationScaleCdf>(
        GnLocationScaleCdf::gaussian(loc, 0.5 + rng.uniform())));
    truths.push_back(loc + rng.normal());
  }
  cdfs.push_back(std::make_unique<DiracCdf>(0.2));
  truths.push_back(0.2);
  cdfs.push_back(std::make_unique<EmpiricalCdf>(
      EmpiricalCdf::uniform_atoms({-1.0, 0.0, 1.0, 2.0})));
  truths.push_back(0.4);
  std::vector<double> thr{-0.5, 0.1, 0.4, 0.9, 1.3};
  cdfs.push_back(std::make_unique<StepwiseCdf>(StepwiseCpd(thr, 0.3)));
  truths.push_back(0.6);

  const double m = static_cast<double>(cdfs.size());
  const int grid = 201;
  const double h = 1.0 / (grid + 1);
  std::vector<double> g(grid);
  for (int k = 1; k <= grid; ++k) {
    double alpha = k * h;
    int covered = 0;
    for (std::size_t j = 0; j < cdfs.size(); ++j) {
      const PredictiveCdf& f = *cdfs[j];
      double lo = f.quantile(alpha / 2.0), hi = f.quantile(1.0 - alpha / 2.0);
      double z = truths[j];
      covered += f.kind() == CdfKind::stepwise ? (z >= lo && z < hi)
                                               : (z >= lo && z <= hi);
    }
    g[k - 1] = std::fabs(covered / m - (1.0 - alpha));
  }
  double want = g.front() * h + g.back() * h;
  for (int k = 0; k + 1 < grid; ++k) want += 0.5 * (g[k] + g[k + 1]) * h;
  EXPECT_NEAR(iae(cdfs, truths), want, 1e-12);
}

TEST(Iae, CoverageBoundAgainstKsHolds) {
  // A deliberately miscalibrated smooth batch: truths drawn overdispersed.
  Rng rng(101);
  CdfList cdfs;
  std::vector<double> truths, means;
  for (int j = 0; j < 500; ++j) {
    cdfs.push_back(std::make_unique<GnLocationScaleCdf>(
        GnLocationScaleCdf::gaussian(0.0, 1.0)));
    truths.push_back(1.8 * rng.normal());
    means.push_back(0.0);
  }
  MetricsReport rep = build_metrics_report(cdfs, truths, means, {0.9}, 8);
  EXPECT_LE(rep.iae, 2.0 * rep.ks_pit + 0.01);
  EXPECT_GT(rep.ks_pit, 0.05);
}

TEST(Crps, DiracClosedForm) {
  DiracCdf d(1.4);
  EXPECT_DOUBLE_EQ(crps(d, 1.4), 0.0);
  EXPECT_DOUBLE_EQ(crps(d, 3.0), 1.6);
}

TEST(Crps, NormalAtMeanClosedForm) {
  for (double sd : {0.4, 1.0, 2.6}) {
    auto g = GnLocationScaleCdf::gaussian(0.7, sd);
    double want = sd * (std::sqrt(2.0) - 1.0) / std::sqrt(M_PI);
    EXPECT_NEAR(crps(g, 0.7), want, 1e-12 * (1.0 + want));
  }
}

TEST(Crps, NormalOffMeanMatchesOracleFormula) {
  auto g = GnLocationScaleCdf::gaussian(-0.3, 1.1);
  for (double z : {-1.7, 0.0, 0.9, 2.4}) {
    double want = normal_mean_abs(-0.3, 1.1, z) - 1.1 / std::sqrt(M_PI);
    EXPECT_NEAR(crps(g, z), want, 1e-12 * (1.0 + std::fabs(want)));
  }
}

TEST(Crps, GnLawMonteCarlo) {
  GNParams theta{1.3, 0.9};
  GnLocationScaleCdf f(0.4, 1.1, theta);
  const double z = 1.0;
  Rng rng(616);
  const int n = 400000;
  double s1 = 0.0, s1sq = 0.0, s2 = 0.0, s2sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double a = 0.4 + 1.1 * gn_sample(theta, rng);
    double b = 0.4 + 1.1 * gn_sample(theta, rng);
    double d1 = std::fabs(a - z), d2 = std::fabs(a - b);
    s1 += d1;
    s1sq += d1 * d1;
    s2 += d2;
    s2sq += d2 * d2;
  }
  double m1 = s1 / n, m2 = s2 / n;
  double se = std::sqrt((s1sq / n - m1 * m1) / n) +
              0.5 * std::sqrt((s2sq / n - m2 * m2) / n);
  EXPECT_NEAR(crps(f, z), m1 - 0.5 * m2, 3.0 * se);
}

TEST(Crps, EmpiricalTwoAtoms) {
  auto e = EmpiricalCdf::uniform_atoms({0.0, 1.0});
  EXPECT_DOUBLE_EQ(e.mean_abs(0.0), 0.5);
  EXPECT_DOUBLE_EQ(e.dispersion(), 0.5);
  EXPECT_DOUBLE_EQ(crps(e, 0.0), 0.25);
}

TEST(Scrps, ClosedFormsAndPointMassRefusal) {
  EXPECT_NEAR(gn_mean_abs({2.0, 1.0}, 0.0), 0.56418958354775629, 1e-13);

  for (double sd : {0.5, 1.0, 2.0}) {
    auto g = GnLocationScaleCdf::gaussian(0.0, sd);
    double d = 2.0 * sd / std::sqrt(M_PI);
    double want = -sd * std::sqrt(2.0 / M_PI) / d - 0.5 * std::log(d);
    EXPECT_NEAR(scrps(g, 0.0), want, 1e-12 * (1.0 + std::fabs(want)));
  }

  auto e = EmpiricalCdf::uniform_atoms({0.0, 1.0});
  EXPECT_NEAR(scrps(e, 0.0), -1.0 + 0.5 * std::log(2.0), 1e-12);

  DiracCdf dd(0.0);
  EXPECT_THROW(scrps(dd, 0.0), std::invalid_argument);
}

TEST(Scrps, GaussianOffCenterOracle) {
  auto g = GnLocationScaleCdf::gaussian(0.8, 1.3);
  double d = 2.0 * 1.3 / std::sqrt(M_PI);
  for (double z : {-0.4, 0.8, 1.9}) {
    double want = -normal_mean_abs(0.8, 1.3, z) / d - 0.5 * std::log(d);
    EXPECT_NEAR(scrps(g, z), want, 1e-12 * (1.0 + std::fabs(want)));
  }
}

TEST(Rmse, HandCases) {
  std::vector<double> a{1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(rmse(a, a), 0.0);
  std::vector<double> shifted{1.5, 2.5, 3.5};
  EXPECT_DOUBLE_EQ(rmse(a, shifted), 0.5);
  std::vector<double> b{0.0, 4.0, 3.0};
  EXPECT_DOUBLE_EQ(rmse(a, b), std::sqrt((1.0 + 4.0) / 3.0));
  std::vector<double> wrong{1.0};
  EXPECT_THROW(rmse(a, wrong), std::invalid_argument);
}

TEST(Report, AssemblesAllPieces) {
  Rng rng(321);
  CdfList cdfs;
  std::vector<double> truths, means;
  const int m = 300;
  for (int j = 0; j < m; ++j) {
    double loc = rng.uniform(-2.0, 2.0);
    cdfs.push_back(std::make_unique<GnLocationScaleCdf>(
        GnLocationScaleCdf::gaussian(loc, 0.9)));
    truths.push_back(loc + 0.9 * rng.normal());
    means.push_back(loc);
  }
  MetricsReport rep = build_metrics_report(cdfs, truths, means, {0.9, 0.95}, 5);

  EXPECT_TRUE(rep.has_nlpd);
  EXPECT_FALSE(rep.stepwise_tail_clipped);
  ASSERT_EQ(rep.levels.size(), 2u);
  EXPECT_DOUBLE_EQ(rep.levels[0].level, 0.9);

  double nlpd = 0.0, scr = 0.0, cr = 0.0;
  for (int j = 0; j < m; ++j) {
    nlpd -= cdfs[j]->log_density(truths[j]);
    scr += scrps(*cdfs[j], truths[j]);
    cr += crps(*cdfs[j], truths[j]);
  }
  EXPECT_NEAR(rep.mean_nlpd, nlpd / m, 1e-12 * (1.0 + std::fabs(nlpd / m)));
  EXPECT_NEAR(rep.mean_scrps, -scr / m, 1e-12 * (1.0 + std::fabs(scr / m)));
  EXPECT_NEAR(rep.mean_crps, cr / m, 1e-12);

  int histo_total = 0;
  for (int c : rep.pit_histogram) histo_total += c;
  EXPECT_EQ(histo_total, m);

  PitSample pit = pit_values(cdfs, truths, 5);
  EXPECT_DOUBLE_EQ(rep.ks_pit, ks_pit(pit));
  EXPECT_DOUBLE_EQ(rep.var_pit, var_pit(pit));
}

TEST(Report, MixedKindsToggleNlpdAndFlags) {
  CdfList cdfs;
  std::vector<double> truths, means;
  Rng rng(31);
  for (int j = 0; j < 40; ++j) {
    double loc = rng.uniform(-1.0, 1.0);
    cdfs.push_back(std::make_unique<GnLocationScaleCdf>(
        GnLocationScaleCdf::gaussian(loc, 1.0)));
    truths.push_back(loc + rng.normal());
    means.push_back(loc);
  }
  cdfs.push_back(std::make_unique<DiracCdf>(0.0));
  truths.push_back(0.0);
  means.push_back(0.0);
  MetricsReport rep = build_metrics_report(cdfs, truths, means, {0.9}, 6);
  EXPECT_FALSE(rep.has_nlpd);
  EXPECT_FALSE(rep.stepwise_tail_clipped);

  std::vector<double> thr{-0.4, 0.0, 0.5, 1.1, 1.7, 2.0, 2.4};
  cdfs.push_back(std::make_unique<StepwiseCdf>(StepwiseCpd(thr, 0.5)));
  truths.push_back(0.7);
  means.push_back(0.9);
  MetricsReport rep2 = build_metrics_report(cdfs, truths, means, {0.9}, 6);
  EXPECT_TRUE(rep2.stepwise_tail_clipped);
}
