#pragma once

// Repetition experiment runner: per-(function, repetition) tasks sample a
// design, fit the GP, build each method's predictives on a fresh test
// design, and score them; a worker pool runs tasks in parallel while all
// randomness flows from counter-derived per-role streams, so results are
// byte-identical for a fixed master seed regardless of scheduling.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gpcal/bcr.hpp"
#include "gpcal/config.hpp"
#include "gpcal/cps.hpp"
#include "gpcal/gp.hpp"
#include "gpcal/io.hpp"
#include "gpcal/jackknife.hpp"
#include "gpcal/metrics.hpp"
#include "gpcal/predictive.hpp"
#include "gpcal/rng.hpp"
#include "gpcal/test_functions.hpp"

namespace gpcal {

inline Eigen::MatrixXd sample_design(
    const std::vector<std::array<double, 2>>& domain, int n,
    std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(domain.size()));
  for (int i = 0; i < n; ++i)
    for (std::size_t j = 0; j < domain.size(); ++j)
      X(i, static_cast<Eigen::Index>(j)) =
          rng.uniform(domain[j][0], domain[j][1]);
  return X;
}

struct LevelOutcome {
  double level = 0.0;
  double coverage = 0.0;
  double mean_width = 0.0;      // over finite intervals
  double mean_rel_width = 0.0;  // per-point width / plain-GP width, averaged
  int infinite_count = 0;
};

struct RunRecord {
  std::string function;
  std::string method;
  int repetition = 0;
  std::uint64_t seed = 0;  // design-stream seed, for traceability
  bool failed = false;
  std::string error;
  bool interval_only = false;  // jackknife+: no predictive distribution
  MetricsReport report;
  std::vector<LevelOutcome> levels;
  double wall_seconds = 0.0;
};

struct CoverageRow {
  std::string function;
  std::string method;
  double level = 0.0;
  double mean_coverage = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
  double mean_rel_width = 0.0;
  long infinite_count = 0;
};

struct MetricsRow {
  std::string function;
  std::string method;
  double ks_pit = 0.0;
  double var_pit = 0.0;
  double iae = 0.0;
  double rmse = 0.0;
  double crps = 0.0;
  double scrps = 0.0;
  double nlpd = std::numeric_limits<double>::quiet_NaN();
};

struct PitHistRow {
  std::string function;
  std::string method;
  std::array<long, 20> counts{};
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunRecord> runs;
  std::vector<CoverageRow> coverage;
  std::vector<MetricsRow> metrics;
  std::vector<PitHistRow> pit_hist;
  int failures = 0;
};

namespace detail {

inline double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

// Lower empirical quantile over repetition values (1-based ceil(q R)).
inline double rep_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double raw = std::ceil(q * static_cast<double>(v.size()));
  auto idx = static_cast<std::size_t>(std::max(raw, 1.0));
  return v[std::min(idx, v.size()) - 1];
}

struct PredContext {
  std::shared_ptr<FittedGP> gp;            // conditioned on the prediction set
  std::shared_ptr<GNPosterior> posterior;  // lazily sampled for bcr methods
};

// Per-(function, repetition) work unit.
class RepTask {
 public:
  RepTask(const ExperimentConfig& cfg, const TestFunction& fn, int rep)
      : cfg_(cfg), fn_(fn), rep_(rep), fkey_(hash64(fn.name)) {}

  std::vector<RunRecord> run() {
    std::vector<RunRecord> records;
    records.reserve(cfg_.methods.size());
    std::string setup_error;
    try {
      setup();
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (const auto& m : cfg_.methods) {
      RunRecord rec;
      rec.function = fn_.name;
      rec.method = m.label();
      rec.repetition = rep_;
      rec.seed = derive_seed(cfg_.seed, fkey_, static_cast<std::uint64_t>(rep_),
                             role::design);
      if (!setup_error.empty()) {
        rec.failed = true;
        rec.error = setup_error;
        records.push_back(std::move(rec));
        continue;
      }
      auto t0 = std::chrono::steady_clock::now();
      try {
        run_method(m, rec);
      } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
      }
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      records.push_back(std::move(rec));
    }
    return records;
  }

 private:
  std::uint64_t rep_seed(std::uint64_t r) const {
    return derive_seed(cfg_.seed, fkey_, static_cast<std::uint64_t>(rep_), r);
  }

  void setup() {
    const int n = cfg_.design_multiplier * fn_.dimension;
    design_ = sample_design(fn_.domain, n, rep_seed(role::design));
    responses_.resize(n);
    for (int i = 0; i < n; ++i)
      responses_[i] = fn_.evaluator(design_.row(i).transpose());
    test_ = sample_design(fn_.domain, cfg_.n_test, rep_seed(role::test));
    truths_.resize(cfg_.n_test);
    for (int i = 0; i < cfg_.n_test; ++i)
      truths_[i] = fn_.evaluator(test_.row(i).transpose());

    const FittedGP& gp = *context(0.0).gp;
    gp_sds_.resize(cfg_.n_test);
    for (int j = 0; j < cfg_.n_test; ++j)
      gp_sds_[j] = gp.posterior(test_.row(j).transpose()).sd;
  }

  // GP conditioned per split fraction; gamma = 0 fits and predicts on the
  // full design, gamma > 0 fits on the first ceil(gamma n) points and
  // conditions on the rest.
  PredContext& context(double gamma) {
    auto key = std::bit_cast<std::uint64_t>(gamma);
    auto it = contexts_.find(key);
    if (it != contexts_.end()) return it->second;

    const auto n = design_.rows();
    Eigen::MatrixXd fit_pts = design_;
    Eigen::VectorXd fit_z = responses_;
    Eigen::MatrixXd pred_pts = design_;
    Eigen::VectorXd pred_z = responses_;
    if (gamma > 0.0) {
      auto n_sel = static_cast<Eigen::Index>(
          std::lround(gamma * static_cast<double>(n)));
      n_sel = std::clamp<Eigen::Index>(n_sel, 2, n - 3);
      fit_pts = design_.topRows(n_sel);
      fit_z = responses_.head(n_sel);
      pred_pts = design_.bottomRows(n - n_sel);
      pred_z = responses_.tail(n - n_sel);
    }
    Dataset fit_data{fit_pts, fit_z, fn_.domain};
    FitResult fit = fit_ml(fit_data, cfg_.regularity,
                           derive_seed(rep_seed(role::fit), key));
    Dataset pred_data{pred_pts, pred_z, fn_.domain};
    PredContext ctx;
    ctx.gp = std::make_shared<FittedGP>(std::move(pred_data), fit.params);
    return contexts_.emplace(key, std::move(ctx)).first->second;
  }

  const GNPosterior& gn_posterior(double gamma) {
    PredContext& ctx = context(gamma);
    if (!ctx.posterior) {
      Eigen::VectorXd r = loo_residuals(*ctx.gp);
      std::vector<double> rv(r.data(), r.data() + r.size());
      auto key = std::bit_cast<std::uint64_t>(gamma);
      ctx.posterior = std::make_shared<GNPosterior>(
          posterior_sample(rv, {cfg_.prior_a, cfg_.prior_b}, cfg_.mcmc_draws,
                           derive_seed(rep_seed(role::mcmc), key)));
    }
    return *ctx.posterior;
  }

  void run_method(const MethodSpec& m, RunRecord& rec) {
    if (m.kind == MethodKind::jackknife_gp) {
      run_jackknife(m, rec);
      return;
    }
    const FittedGP& gp = *context(m.gamma).gp;

    CdfList cdfs;
    cdfs.reserve(static_cast<std::size_t>(cfg_.n_test));
    std::vector<double> means(static_cast<std::size_t>(cfg_.n_test));

    if (m.kind == MethodKind::gp) {
      for (int j = 0; j < cfg_.n_test; ++j) {
        Posterior p = gp.posterior(test_.row(j).transpose());
        means[j] = p.mean;
        cdfs.push_back(gp_predictive_cdf(p));
      }
    } else if (m.kind == MethodKind::cps_gp) {
      Rng tau_rng(derive_seed(rep_seed(role::tau), hash64(m.label())));
      for (int j = 0; j < cfg_.n_test; ++j) {
        double tau = m.fixed_tau ? m.tau : tau_rng.uniform();
        Eigen::VectorXd x = test_.row(j).transpose();
        means[j] = gp.posterior(x).mean;
        try {
          ThresholdSet ts = compute_thresholds(gp, x);
          std::vector<double> th(ts.thresholds.data(),
                                 ts.thresholds.data() + ts.thresholds.size());
          cdfs.push_back(cps_predictive_cdf(StepwiseCpd(std::move(th), tau)));
        } catch (const std::exception&) {
          cdfs.push_back(std::make_unique<DiracCdf>(means[j]));
        }
      }
    } else {  // bcr_gp
      const GNPosterior& post = gn_posterior(m.gamma);
      GNParams theta =
          m.rule == 2 ? select_rule2(post, m.delta) : select_rule1(post, m.delta);
      for (int j = 0; j < cfg_.n_test; ++j) {
        Posterior p = gp.posterior(test_.row(j).transpose());
        means[j] = p.mean;
        cdfs.push_back(bcr_predictive_cdf(bcr_predictive(
            gp, test_.row(j).transpose(), theta)));
      }
    }

    rec.report = build_metrics_report(
        cdfs, truths_, means, cfg_.levels,
        derive_seed(rep_seed(role::pit), hash64(m.label())));
    score_intervals(rec, [&](int j, double alpha, double& lo, double& hi,
                             bool& half_open) {
      lo = cdfs[j]->quantile(alpha / 2.0);
      hi = cdfs[j]->quantile(1.0 - alpha / 2.0);
      half_open = cdfs[j]->kind() == CdfKind::stepwise;
    });
  }

  void run_jackknife(const MethodSpec& m, RunRecord& rec) {
    const FittedGP& gp = *context(m.gamma).gp;
    rec.interval_only = true;
    std::vector<double> means(static_cast<std::size_t>(cfg_.n_test));
    for (int j = 0; j < cfg_.n_test; ++j)
      means[j] = gp.posterior(test_.row(j).transpose()).mean;
    rec.report.ks_pit = nan_value();
    rec.report.var_pit = nan_value();
    rec.report.iae = nan_value();
    rec.report.mean_crps = nan_value();
    rec.report.mean_scrps = nan_value();
    rec.report.rmse = rmse(means, truths_);
    score_intervals(rec, [&](int j, double alpha, double& lo, double& hi,
                             bool& half_open) {
      PredictionInterval pi =
          jackknife_plus_interval(gp, test_.row(j).transpose(), alpha);
      lo = pi.lower;
      hi = pi.upper;
      half_open = false;
    });
  }

  template <class IntervalFn>
  void score_intervals(RunRecord& rec, IntervalFn&& interval_at) {
    for (double level : cfg_.levels) {
      const double alpha = 1.0 - level;
      LevelOutcome out;
      out.level = level;
      int covered = 0, finite = 0, rel_n = 0;
      double width_sum = 0.0, rel_sum = 0.0;
      for (int j = 0; j < cfg_.n_test; ++j) {
        double lo = 0.0, hi = 0.0;
        bool half_open = false;
        interval_at(j, alpha, lo, hi, half_open);
        double z = truths_[j];
        covered += half_open ? (z >= lo && z < hi) : (z >= lo && z <= hi);
        if (std::isfinite(lo) && std::isfinite(hi)) {
          ++finite;
          double w = hi - lo;
          width_sum += w;
          double base = gp_width(j, alpha);
          if (base > 0.0) {
            ++rel_n;
            rel_sum += w / base;
          }
        } else {
          ++out.infinite_count;
        }
      }
      out.coverage = covered / static_cast<double>(cfg_.n_test);
      out.mean_width = finite > 0 ? width_sum / finite : 0.0;
      out.mean_rel_width = rel_n > 0 ? rel_sum / rel_n : nan_value();
      rec.levels.push_back(out);
    }
  }

  double gp_width(int j, double alpha) const {
    static const GNParams kGauss{2.0, std::sqrt(2.0)};
    return 2.0 * gp_sds_[j] * gn_quantile(kGauss, 1.0 - alpha / 2.0);
  }

  const ExperimentConfig& cfg_;
  const TestFunction& fn_;
  int rep_;
  std::uint64_t fkey_;
  Eigen::MatrixXd design_, test_;
  Eigen::VectorXd responses_;
  std::vector<double> truths_;
  std::vector<double> gp_sds_;
  std::map<std::uint64_t, PredContext> contexts_;
};

inline int worker_count(int n_tasks) {
  int workers = 0;
  if (const char* env = std::getenv("GPCAL_WORKERS")) {
    workers = std::atoi(env);
    if (workers < 1) workers = 1;
  } else {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
  }
  return std::min(workers, std::max(n_tasks, 1));
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.config = config;

  std::vector<TestFunction> fns;
  for (const auto& name : config.functions) fns.push_back(find_function(name));

  struct TaskSlot {
    int fn_index = 0;
    int rep = 0;
    std::vector<RunRecord> records;
  };
  std::vector<TaskSlot> slots;
  for (int fi = 0; fi < static_cast<int>(fns.size()); ++fi)
    for (int rep = 0; rep < config.repetitions; ++rep)
      slots.push_back(TaskSlot{fi, rep, {}});

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t k = next.fetch_add(1);
      if (k >= slots.size()) return;
      detail::RepTask task(config, fns[slots[k].fn_index], slots[k].rep);
      slots[k].records = task.run();
    }
  };
  int n_workers = detail::worker_count(static_cast<int>(slots.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (auto& slot : slots)
    for (auto& rec : slot.records) {
      result.failures += rec.failed;
      result.runs.push_back(std::move(rec));
    }

  // Aggregate in (function, method, level) order over successful runs.
  for (const auto& fn : fns) {
    for (const auto& m : config.methods) {
      const std::string label = m.label();
      std::vector<const RunRecord*> ok;
      for (const auto& r : result.runs)
        if (r.function == fn.name && r.method == label && !r.failed)
          ok.push_back(&r);
      if (ok.empty()) continue;

      for (std::size_t li = 0; li < config.levels.size(); ++li) {
        CoverageRow row;
        row.function = fn.name;
        row.method = label;
        row.level = config.levels[li];
        std::vector<double> covs;
        double rel_sum = 0.0;
        int rel_n = 0;
        for (const RunRecord* r : ok) {
          const LevelOutcome& lo = r->levels[li];
          covs.push_back(lo.coverage);
          row.mean_coverage += lo.coverage;
          row.infinite_count += lo.infinite_count;
          if (!std::isnan(lo.mean_rel_width)) {
            rel_sum += lo.mean_rel_width;
            ++rel_n;
          }
        }
        row.mean_coverage /= static_cast<double>(ok.size());
        row.q05 = detail::rep_quantile(covs, 0.05);
        row.q95 = detail::rep_quantile(covs, 0.95);
        row.mean_rel_width =
            rel_n > 0 ? rel_sum / rel_n : detail::nan_value();
        result.coverage.push_back(row);
      }

      if (!ok.front()->interval_only) {
        MetricsRow row;
        row.function = fn.name;
        row.method = label;
        double nlpd_sum = 0.0;
        bool all_nlpd = true;
        for (const RunRecord* r : ok) {
          row.ks_pit += r->report.ks_pit;
          row.var_pit += r->report.var_pit;
          row.iae += r->report.iae;
          row.rmse += r->report.rmse;
          row.crps += r->report.mean_crps;
          row.scrps += r->report.mean_scrps;
          if (r->report.has_nlpd)
            nlpd_sum += r->report.mean_nlpd;
          else
            all_nlpd = false;
        }
        auto n = static_cast<double>(ok.size());
        row.ks_pit /= n;
        row.var_pit /= n;
        row.iae /= n;
        row.rmse /= n;
        row.crps /= n;
        row.scrps /= n;
        if (all_nlpd) row.nlpd = nlpd_sum / n;
        result.metrics.push_back(row);

        PitHistRow hist;
        hist.function = fn.name;
        hist.method = label;
        for (const RunRecord* r : ok)
          for (std::size_t b = 0; b < hist.counts.size(); ++b)
            hist.counts[b] += r->report.pit_histogram[b];
        result.pit_hist.push_back(hist);
      } else {
        MetricsRow row;
        row.function = fn.name;
        row.method = label;
        row.ks_pit = detail::nan_value();
        row.var_pit = detail::nan_value();
        row.iae = detail::nan_value();
        row.crps = detail::nan_value();
        row.scrps = detail::nan_value();
        for (const RunRecord* r : ok) row.rmse += r->report.rmse;
        row.rmse /= static_cast<double>(ok.size());
        result.metrics.push_back(row);
      }
    }
  }
  return result;
}

namespace detail {

inline std::string sanitize_csv(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace detail

// Writes the output bundle: per-run CSVs, the aggregate coverage and metric
// tables, the PIT histogram plot data, and a JSON summary. All files are
// written atomically; wall time appears only in runs.csv.
inline void write_output_bundle(const ExperimentResult& result,
                                const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  std::ostringstream runs;
  runs << "function,method,repetition,seed,status,error,ks_pit,var_pit,iae,"
          "rmse,crps,scrps,nlpd,wall_seconds\n";
  for (const auto& r : result.runs) {
    runs << r.function << ',' << r.method << ',' << r.repetition << ','
         << r.seed << ',' << (r.failed ? "failed" : "ok") << ','
         << detail::sanitize_csv(r.error) << ',';
    if (r.failed) {
      runs << ",,,,,,";
    } else {
      runs << format_g6(r.report.ks_pit) << ',' << format_g6(r.report.var_pit)
           << ',' << format_g6(r.report.iae) << ',' << format_g6(r.report.rmse)
           << ',' << format_g6(r.report.mean_crps) << ','
           << format_g6(r.report.mean_scrps) << ','
           << (r.report.has_nlpd ? format_g6(r.report.mean_nlpd) : "") << ',';
    }
    runs << format_g6(r.wall_seconds) << "\n";
  }
  write_text_atomic(out_dir / "runs.csv", runs.str());

  std::ostringstream rcov;
  rcov << "function,method,repetition,level,coverage,mean_width,"
          "mean_rel_width,infinite_count\n";
  for (const auto& r : result.runs) {
    if (r.failed) continue;
    for (const auto& lo : r.levels)
      rcov << r.function << ',' << r.method << ',' << r.repetition << ','
           << format_g6(lo.level) << ',' << format_g6(lo.coverage) << ','
           << format_g6(lo.mean_width) << ',' << format_g6(lo.mean_rel_width)
           << ',' << lo.infinite_count << "\n";
  }
  write_text_atomic(out_dir / "runs_coverage.csv", rcov.str());

  std::ostringstream cov;
  cov << "function,method,level,mean_coverage,q05,q95,mean_rel_width,"
         "infinite_count\n";
  for (const auto& row : result.coverage)
    cov << row.function << ',' << row.method << ',' << format_g6(row.level)
        << ',' << format_g6(row.mean_coverage) << ',' << format_g6(row.q05)
        << ',' << format_g6(row.q95) << ',' << format_g6(row.mean_rel_width)
        << ',' << row.infinite_count << "\n";
  write_text_atomic(out_dir / "coverage.csv", cov.str());

  std::ostringstream met;
  met << "function,method,ks_pit,var_pit,iae,rmse,crps,scrps,nlpd\n";
  for (const auto& row : result.metrics)
    met << row.function << ',' << row.method << ',' << format_g6(row.ks_pit)
        << ',' << format_g6(row.var_pit) << ',' << format_g6(row.iae) << ','
        << format_g6(row.rmse) << ',' << format_g6(row.crps) << ','
        << format_g6(row.scrps) << ','
        << (std::isnan(row.nlpd) ? "" : format_g6(row.nlpd)) << "\n";
  write_text_atomic(out_dir / "metrics.csv", met.str());

  std::ostringstream hist;
  hist << "function,method,bin,lo,hi,count\n";
  for (const auto& row : result.pit_hist)
    for (std::size_t b = 0; b < row.counts.size(); ++b)
      hist << row.function << ',' << row.method << ',' << b << ','
           << format_g6(b / 20.0) << ',' << format_g6((b + 1) / 20.0) << ','
           << row.counts[b] << "\n";
  write_text_atomic(out_dir / "pit_hist.csv", hist.str());

  nlohmann::json summary;
  summary["config"] = config_to_json(result.config);
  summary["failures"] = result.failures;
  summary["runs"] = result.runs.size();
  summary["coverage"] = nlohmann::json::array();
  for (const auto& row : result.coverage)
    summary["coverage"].push_back(
        {{"function", row.function},
         {"method", row.method},
         {"level", row.level},
         {"mean_coverage", format_g6(row.mean_coverage)},
         {"q05", format_g6(row.q05)},
         {"q95", format_g6(row.q95)},
         {"mean_rel_width", format_g6(row.mean_rel_width)},
         {"infinite_count", row.infinite_count}});
  summary["metrics"] = nlohmann::json::array();
  for (const auto& row : result.metrics)
    summary["metrics"].push_back({{"function", row.function},
                                  {"method", row.method},
                                  {"ks_pit", format_g6(row.ks_pit)},
                                  {"var_pit", format_g6(row.var_pit)},
                                  {"iae", format_g6(row.iae)},
                                  {"rmse", format_g6(row.rmse)},
                                  {"crps", format_g6(row.crps)},
                                  {"scrps", format_g6(row.scrps)}});
  write_text_atomic(out_dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace gpcal
