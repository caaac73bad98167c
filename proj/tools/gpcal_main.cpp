// Batch CLI: `run` executes a benchmark config and writes the output bundle,
// `cdf` traces a predictive CDF at one input for external plotting, and
// `selftest` replays the fast analytic oracle checks.

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gpcal/gpcal.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::uint64_t* seed_override, int* reps_override,
            bool full_scale) {
  if (!std::filesystem::exists(config_path)) {
    std::cerr << "error: config file not found: " << config_path << "\n";
    return 2;
  }
  gpcal::ExperimentConfig config;
  try {
    config = gpcal::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (full_scale) {
    config.repetitions = 100;
    config.n_test = 4000;
  }
  if (seed_override) config.seed = *seed_override;
  if (reps_override) config.repetitions = *reps_override;

  try {
    config.validate();
    gpcal::ExperimentResult result = gpcal::run_experiment(config);
    gpcal::write_output_bundle(result, out_dir);

    std::printf("%-16s %-16s %7s %9s %8s %8s %10s %9s\n", "function",
                "method", "level", "coverage", "q05", "q95", "rel_width",
                "infinite");
    for (const auto& row : result.coverage)
      std::printf("%-16s %-16s %7.6g %9.6g %8.6g %8.6g %10.6g %9ld\n",
                  row.function.c_str(), row.method.c_str(), row.level,
                  row.mean_coverage, row.q05, row.q95, row.mean_rel_width,
                  row.infinite_count);
    if (result.failures > 0)
      std::printf("note: %d of %zu runs failed; see runs.csv\n",
                  result.failures, result.runs.size());
    std::printf("output written to %s\n", out_dir.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

gpcal::Dataset dataset_from_csv(const std::string& path) {
  gpcal::CsvTable table = gpcal::read_csv(path);
  if (table.header.size() < 2)
    throw std::runtime_error("data file needs coordinate columns + response");
  if (table.rows.size() < 3)
    throw std::runtime_error("data file needs at least 3 rows");
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto d = static_cast<Eigen::Index>(table.header.size()) - 1;
  gpcal::Dataset data;
  data.points.resize(n, d);
  data.responses.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.points(i, j) = table.rows[i][j];
    data.responses[i] = table.rows[i][d];
  }
  data.domain.resize(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    data.domain[static_cast<std::size_t>(j)] = {data.points.col(j).minCoeff(),
                                                data.points.col(j).maxCoeff()};
  }
  return data;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    out.push_back(std::stod(cell, &used));
    if (used != cell.size())
      throw std::runtime_error("not a number: '" + cell + "'");
  }
  return out;
}

void write_trace(const std::string& path,
                 const std::vector<std::pair<double, double>>& rows) {
  std::ostringstream out;
  out << "z,cdf\n";
  for (const auto& [z, f] : rows)
    out << gpcal::format_g6(z) << ',' << gpcal::format_g6(f) << "\n";
  gpcal::write_text_atomic(path, out.str());
}

std::vector<std::pair<double, double>> smooth_trace(
    const gpcal::PredictiveCdf& cdf) {
  double z_lo = cdf.quantile(1e-4), z_hi = cdf.quantile(1.0 - 1e-4);
  constexpr int kPoints = 513;
  std::vector<std::pair<double, double>> rows;
  rows.reserve(kPoints);
  for (int k = 0; k < kPoints; ++k) {
    double z = z_lo + (z_hi - z_lo) * k / (kPoints - 1);
    rows.emplace_back(z, cdf.cdf(z));
  }
  return rows;
}

std::vector<std::pair<double, double>> stepwise_trace(
    const gpcal::StepwiseCpd& cpd) {
  const auto& c = cpd.sorted_thresholds();
  const double n1 = static_cast<double>(c.size()) + 1.0;
  double span = std::max(c.back() - c.front(), 1e-6);
  std::vector<std::pair<double, double>> rows;
  rows.emplace_back(c.front() - 0.1 * span, cpd.tau() / n1);
  double below = 0.0;
  std::size_t i = 0;
  while (i < c.size()) {
    std::size_t ties = 1;
    while (i + ties < c.size() && c[i + ties] == c[i]) ++ties;
    rows.emplace_back(c[i], (below + cpd.tau()) / n1);
    below += static_cast<double>(ties);
    rows.emplace_back(c[i], (below + cpd.tau()) / n1);
    i += ties;
  }
  rows.emplace_back(c.back() + 0.1 * span, (below + cpd.tau()) / n1);
  return rows;
}

std::vector<std::pair<double, double>> dirac_trace(double atom) {
  return {{atom, 0.0}, {atom, 1.0}};
}

int cmd_cdf(const std::string& data_path, const std::string& method,
            const std::string& x_text, double tau, double delta,
            const std::string& rule, const std::string& theta_text,
            int regularity, std::uint64_t seed, const std::string& out_path) {
  try {
    gpcal::Dataset data = dataset_from_csv(data_path);
    std::vector<double> coords = parse_number_list(x_text);
    if (static_cast<Eigen::Index>(coords.size()) != data.d())
      throw std::runtime_error("--x has " + std::to_string(coords.size()) +
                               " coordinates, data has " +
                               std::to_string(data.d()));
    Eigen::VectorXd x =
        Eigen::Map<Eigen::VectorXd>(coords.data(),
                                    static_cast<Eigen::Index>(coords.size()));

    gpcal::FitResult fit = gpcal::fit_ml(data, regularity, seed);
    gpcal::FittedGP gp(data, fit.params);

    std::vector<std::pair<double, double>> rows;
    if (method == "gp") {
      gpcal::Posterior p = gp.posterior(x);
      if (p.sd == 0.0) {
        std::cerr << "note: point mass at " << p.mean << "\n";
        rows = dirac_trace(p.mean);
      } else {
        rows = smooth_trace(gpcal::GnLocationScaleCdf::gaussian(p.mean, p.sd));
      }
    } else if (method == "cps-gp") {
      try {
        gpcal::ThresholdSet ts = gpcal::compute_thresholds(gp, x);
        std::vector<double> th(ts.thresholds.data(),
                               ts.thresholds.data() + ts.thresholds.size());
        rows = stepwise_trace(gpcal::StepwiseCpd(std::move(th), tau));
      } catch (const std::exception&) {
        double mean = gp.posterior(x).mean;
        std::cerr << "note: x lies on a design point; the conformal law is a "
                     "point mass at "
                  << mean << "\n";
        rows = dirac_trace(mean);
      }
    } else if (method == "bcr-gp") {
      gpcal::GNParams theta;
      if (!theta_text.empty()) {
        std::vector<double> tv = parse_number_list(theta_text);
        if (tv.size() != 2)
          throw std::runtime_error("--theta expects 'shape,scale'");
        theta = gpcal::GNParams{tv[0], tv[1]};
        theta.validate();
      } else {
        Eigen::VectorXd r = gpcal::loo_residuals(gp);
        std::vector<double> rv(r.data(), r.data() + r.size());
        gpcal::GNPosterior post = gpcal::posterior_sample(
            rv, {10.0, 10.0}, 3000,
            gpcal::derive_seed(seed, gpcal::role::mcmc));
        theta = rule == "ks-pit" ? gpcal::select_rule2(post, delta)
                                 : gpcal::select_rule1(post, delta);
      }
      gpcal::BcrPredictive pred = gpcal::bcr_predictive(gp, x, theta);
      if (pred.gp_posterior.sd == 0.0) {
        std::cerr << "note: point mass at " << pred.gp_posterior.mean << "\n";
        rows = dirac_trace(pred.gp_posterior.mean);
      } else {
        rows = smooth_trace(gpcal::GnLocationScaleCdf(
            pred.gp_posterior.mean, pred.gp_posterior.sd, pred.selected));
      }
    } else {
      throw std::runtime_error("unknown method: " + method);
    }
    write_trace(out_path, rows);
    std::printf("trace with %zu rows written to %s\n", rows.size(),
                out_path.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

struct SelfCheck {
  const char* name;
  bool (*fn)(std::string&);
};

bool check_loo_refit(std::string& msg) {
  gpcal::Rng rng(42);
  const int n = 12;
  gpcal::Dataset data;
  data.points.resize(n, 1);
  data.responses.resize(n);
  data.domain = {{0.0, 1.0}};
  for (int i = 0; i < n; ++i) {
    data.points(i, 0) = (i + rng.uniform() * 0.9) / n;
    data.responses[i] = std::sin(6.0 * data.points(i, 0)) + 0.1 * rng.normal();
  }
  gpcal::KernelParams kp;
  kp.mean = 0.2;
  kp.variance = 1.3;
  kp.lengthscales = Eigen::VectorXd::Constant(1, 0.3);
  kp.regularity = 2;
  gpcal::FittedGP gp(data, kp);
  gpcal::LooMoments loo = gp.loo();
  for (int i = 0; i < n; ++i) {
    gpcal::Dataset sub;
    sub.points.resize(n - 1, 1);
    sub.responses.resize(n - 1);
    sub.domain = data.domain;
    int r = 0;
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      sub.points(r, 0) = data.points(k, 0);
      sub.responses[r] = data.responses[k];
      ++r;
    }
    gpcal::FittedGP refit(sub, kp);
    gpcal::Posterior p = refit.posterior(data.points.row(i).transpose());
    if (std::fabs(p.mean - loo.means[i]) > 1e-7 * (1.0 + std::fabs(p.mean)) ||
        std::fabs(p.sd - loo.sds[i]) > 1e-7 * (1.0 + p.sd)) {
      msg = "delete-one refit mismatch at i=" + std::to_string(i);
      return false;
    }
  }
  return true;
}

bool check_threshold_affine(std::string& msg) {
  gpcal::Rng rng(7);
  const int n = 10;
  gpcal::Dataset data;
  data.points.resize(n, 2);
  data.responses.resize(n);
  data.domain = {{0.0, 1.0}, {0.0, 1.0}};
  for (int i = 0; i < n; ++i) {
    data.points(i, 0) = rng.uniform();
    data.points(i, 1) = rng.uniform();
    data.responses[i] =
        std::cos(3.0 * data.points(i, 0)) * data.points(i, 1) + rng.normal();
  }
  gpcal::KernelParams kp;
  kp.mean = -0.1;
  kp.variance = 2.0;
  kp.lengthscales = Eigen::VectorXd::Constant(2, 0.4);
  kp.regularity = 1;
  gpcal::FittedGP gp(data, kp);
  Eigen::VectorXd x(2);
  x << 0.37, 0.61;
  gpcal::ThresholdSet ts = gpcal::compute_thresholds(gp, x);
  for (int i = 0; i < n; ++i) {
    gpcal::Dataset aug;
    aug.points.resize(n + 1, 2);
    aug.responses.resize(n + 1);
    aug.domain = data.domain;
    aug.points.topRows(n) = data.points;
    aug.responses.head(n) = data.responses;
    aug.points.row(n) = x.transpose();
    aug.responses[n] = ts.thresholds[i];
    gpcal::FittedGP refit(aug, kp);
    gpcal::LooMoments loo = refit.loo();
    if (std::fabs(loo.residuals[i] - loo.residuals[n]) > 1e-6) {
      msg = "augmented residual equality fails at i=" + std::to_string(i);
      return false;
    }
  }
  return true;
}

bool check_gn_analytics(std::string& msg) {
  gpcal::GNParams laplace{1.0, 1.0};
  if (std::fabs(gpcal::gn_cdf(laplace, 1.0) - 0.8160602794142788) > 1e-12) {
    msg = "laplace cdf(1)";
    return false;
  }
  gpcal::GNParams gauss{2.0, std::sqrt(2.0)};
  for (double z = -3.0; z <= 3.0; z += 0.25) {
    double ref = 0.5 * std::erfc(-z / std::sqrt(2.0));
    if (std::fabs(gpcal::gn_cdf(gauss, z) - ref) > 1e-10) {
      msg = "gaussian reduction at z=" + std::to_string(z);
      return false;
    }
  }
  gpcal::GNParams odd{0.7, 0.5};
  for (double p = 0.02; p < 1.0; p += 0.07) {
    double z = gpcal::gn_quantile(odd, p);
    if (std::fabs(gpcal::gn_cdf(odd, z) - p) > 1e-9) {
      msg = "quantile roundtrip at p=" + std::to_string(p);
      return false;
    }
  }
  if (std::fabs(gpcal::gn_variance(gauss) - 1.0) > 1e-12 ||
      std::fabs(gpcal::gn_variance(laplace) - 2.0) > 1e-12) {
    msg = "variance closed form";
    return false;
  }
  return true;
}

bool check_ks_exact(std::string& msg) {
  gpcal::Rng rng(99);
  gpcal::PitSample pit;
  pit.values.resize(200);
  for (auto& u : pit.values) u = rng.uniform() * rng.uniform();
  double exact = gpcal::ks_pit(pit);
  double grid = 0.0;
  std::vector<double> sorted = pit.values;
  std::sort(sorted.begin(), sorted.end());
  for (int k = 0; k <= 10000; ++k) {
    double u = k / 10000.0;
    auto it = std::upper_bound(sorted.begin(), sorted.end(), u);
    double g = static_cast<double>(it - sorted.begin()) / sorted.size();
    grid = std::max(grid, std::fabs(g - u));
  }
  if (exact + 1e-12 < grid || exact > grid + 1.0 / 10000.0 + 1e-12) {
    msg = "order-statistic KS != grid scan";
    return false;
  }
  return true;
}

bool check_kolmogorov(std::string& msg) {
  const gpcal::GNParams pairs[][2] = {
      {{1.0, 1.0}, {2.0, 1.0}},
      {{0.7, 0.5}, {3.0, 2.0}},
      {{2.0, 1.0}, {2.0, 1.7}},
      {{4.5, 0.8}, {0.9, 1.1}},
  };
  for (const auto& pr : pairs) {
    double fast = gpcal::gn_kolmogorov(pr[0], pr[1]);
    double dense = 0.0;
    double hi = std::max(gpcal::gn_quantile(pr[0], 1.0 - 1e-7),
                         gpcal::gn_quantile(pr[1], 1.0 - 1e-7));
    for (int k = 0; k <= 20000; ++k) {
      double z = hi * k / 20000.0;
      dense = std::max(dense, std::fabs(gpcal::gn_cdf(pr[0], z) -
                                        gpcal::gn_cdf(pr[1], z)));
    }
    if (std::fabs(fast - dense) > 1e-4) {
      msg = "crossing-root sup differs from dense grid";
      return false;
    }
  }
  return true;
}

int cmd_selftest() {
  const SelfCheck checks[] = {
      {"delete-one refit identity", check_loo_refit},
      {"augmented residual thresholds", check_threshold_affine},
      {"generalized normal analytics", check_gn_analytics},
      {"exact KS statistic", check_ks_exact},
      {"Kolmogorov distance", check_kolmogorov},
  };
  int failures = 0;
  for (const auto& c : checks) {
    std::string msg;
    bool ok = false;
    try {
      ok = c.fn(msg);
    } catch (const std::exception& e) {
      msg = e.what();
    }
    std::printf("[%s] %s%s%s\n", ok ? "ok" : "FAIL", c.name,
                msg.empty() ? "" : ": ", msg.c_str());
    failures += !ok;
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrated predictive distributions for GP interpolation"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "execute a benchmark config");
  std::string config_path, out_dir = "out";
  std::uint64_t seed_opt = 0;
  int reps_opt = 0;
  bool full_scale = false;
  run->add_option("--config", config_path, "config JSON path")->required();
  run->add_option("--out", out_dir, "output directory");
  auto* seed_flag = run->add_option("--seed", seed_opt, "master seed override");
  auto* reps_flag =
      run->add_option("--reps", reps_opt, "repetition count override");
  run->add_flag("--full-scale", full_scale,
                "paper scale: 100 repetitions, 4000 test points");

  auto* cdf = app.add_subcommand("cdf", "trace a predictive CDF at a point");
  std::string data_path, method, x_text, rule = "variance", theta_text;
  std::string trace_out = "trace.csv";
  double tau = 0.5, delta = 0.1;
  int regularity = 2;
  std::uint64_t cdf_seed = 1;
  cdf->add_option("--data", data_path,
                  "CSV with d coordinate columns + response")
      ->required();
  cdf->add_option("--method", method, "gp | cps-gp | bcr-gp")->required();
  cdf->add_option("--x", x_text, "comma-separated coordinates")->required();
  cdf->add_option("--tau", tau, "cps-gp randomization value");
  cdf->add_option("--delta", delta, "bcr-gp selection level");
  cdf->add_option("--rule", rule, "bcr-gp rule: variance | ks-pit");
  cdf->add_option("--theta", theta_text,
                  "bcr-gp 'shape,scale' override (skips sampling)");
  cdf->add_option("--regularity", regularity, "Matern regularity p");
  cdf->add_option("--seed", cdf_seed, "seed for fitting and sampling");
  cdf->add_option("--out", trace_out, "trace CSV path");

  auto* selftest = app.add_subcommand("selftest", "run the oracle checks");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return cmd_run(config_path, out_dir, seed_flag->count() ? &seed_opt : nullptr,
                   reps_flag->count() ? &reps_opt : nullptr, full_scale);
  if (cdf->parsed())
    return cmd_cdf(data_path, method, x_text, tau, delta, rule, theta_text,
                   regularity, cdf_seed, trace_out);
  if (selftest->parsed()) return cmd_selftest();
  return 1;
}
