#pragma once

// Experiment configuration: the benchmark protocol constants and the method
// list with per-method options, serialized as JSON with exact round-tripping.

#include <nlohmann/json.hpp>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpcal/test_functions.hpp"

namespace gpcal {

enum class MethodKind { gp, cps_gp, bcr_gp, jackknife_gp };

struct MethodSpec {
  MethodKind kind = MethodKind::gp;
  int rule = 1;             // bcr-gp: 1 = variance quantile, 2 = ks-pit
  double delta = 0.1;       // bcr-gp selection level
  bool fixed_tau = false;   // cps-gp: fixed tau instead of per-point draws
  double tau = 0.5;         // cps-gp fixed-tau value
  double gamma = 0.0;       // fraction of the design used only for fitting

  std::string label() const {
    auto num = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", v);
      return std::string(buf);
    };
    std::string base;
    switch (kind) {
      case MethodKind::gp:
        base = "gp";
        break;
      case MethodKind::cps_gp:
        base = "cps-gp";
        break;
      case MethodKind::bcr_gp:
        base = rule == 2 ? "bcr-gp(ks-pit)" : "bcr-gp(" + num(delta) + ")";
        break;
      case MethodKind::jackknife_gp:
        base = "j+gp";
        break;
    }
    if (gamma > 0.0) base += "[gamma=" + num(gamma) + "]";
    return base;
  }

  void validate() const {
    if (kind == MethodKind::bcr_gp) {
      if (rule != 1 && rule != 2)
        throw std::invalid_argument("bcr-gp rule must be 1 or 2");
      if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("bcr-gp delta outside (0,1)");
    }
    if (kind == MethodKind::cps_gp && fixed_tau && !(tau >= 0.0 && tau <= 1.0))
      throw std::invalid_argument("fixed tau outside [0,1]");
    if (!(gamma >= 0.0 && gamma < 1.0))
      throw std::invalid_argument("gamma outside [0,1)");
  }
};

struct ExperimentConfig {
  std::vector<std::string> functions;
  int design_multiplier = 20;   // design size = multiplier * d
  int n_test = 2000;
  int repetitions = 20;
  int regularity = 2;
  std::vector<MethodSpec> methods;
  std::vector<double> levels{0.9, 0.95};
  std::uint64_t seed = 1;
  int mcmc_draws = 3000;
  double prior_a = 10.0;
  double prior_b = 10.0;

  void validate() const {
    if (functions.empty())
      throw std::invalid_argument("config lists no functions");
    for (const auto& f : functions) find_function(f);
    if (design_multiplier < 1)
      throw std::invalid_argument("design multiplier must be >= 1");
    if (n_test < 1) throw std::invalid_argument("n_test must be >= 1");
    if (repetitions < 1)
      throw std::invalid_argument("repetitions must be >= 1");
    if (regularity < 0) throw std::invalid_argument("regularity must be >= 0");
    if (methods.empty()) throw std::invalid_argument("config lists no methods");
    for (const auto& m : methods) m.validate();
    if (levels.empty()) throw std::invalid_argument("config lists no levels");
    for (double l : levels)
      if (!(l > 0.0 && l < 1.0))
        throw std::invalid_argument("levels must lie in (0,1)");
    if (mcmc_draws < 100)
      throw std::invalid_argument("mcmc draws must be >= 100");
    if (!(prior_a > 0.0 && prior_b > 0.0))
      throw std::invalid_argument("prior bounds must be positive");
  }
};

inline nlohmann::json method_to_json(const MethodSpec& m) {
  nlohmann::json j;
  switch (m.kind) {
    case MethodKind::gp:
      j["method"] = "gp";
      break;
    case MethodKind::cps_gp:
      j["method"] = "cps-gp";
      j["tau_mode"] = m.fixed_tau ? "fixed" : "random";
      if (m.fixed_tau) j["tau"] = m.tau;
      break;
    case MethodKind::bcr_gp:
      j["method"] = "bcr-gp";
      j["rule"] = m.rule == 2 ? "ks-pit" : "variance";
      j["delta"] = m.delta;
      break;
    case MethodKind::jackknife_gp:
      j["method"] = "j+gp";
      break;
  }
  if (m.gamma > 0.0) j["gamma"] = m.gamma;
  return j;
}

inline MethodSpec method_from_json(const nlohmann::json& j) {
  MethodSpec m;
  std::string name = j.at("method").get<std::string>();
  if (name == "gp") {
    m.kind = MethodKind::gp;
  } else if (name == "cps-gp") {
    m.kind = MethodKind::cps_gp;
    std::string mode = j.value("tau_mode", std::string("random"));
    if (mode == "fixed")
      m.fixed_tau = true;
    else if (mode != "random")
      throw std::invalid_argument("tau_mode must be random or fixed");
    m.tau = j.value("tau", 0.5);
  } else if (name == "bcr-gp") {
    m.kind = MethodKind::bcr_gp;
    std::string rule = j.value("rule", std::string("variance"));
    if (rule == "variance" || rule == "1")
      m.rule = 1;
    else if (rule == "ks-pit" || rule == "2")
      m.rule = 2;
    else
      throw std::invalid_argument("rule must be variance or ks-pit");
    m.delta = j.value("delta", 0.1);
  } else if (name == "j+gp" || name == "jackknife+") {
    m.kind = MethodKind::jackknife_gp;
  } else {
    throw std::invalid_argument("unknown method: " + name);
  }
  m.gamma = j.value("gamma", 0.0);
  m.validate();
  return m;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["functions"] = c.functions;
  j["design_multiplier"] = c.design_multiplier;
  j["n_test"] = c.n_test;
  j["repetitions"] = c.repetitions;
  j["regularity"] = c.regularity;
  j["levels"] = c.levels;
  j["seed"] = c.seed;
  j["mcmc"] = {{"draws", c.mcmc_draws},
               {"prior_a", c.prior_a},
               {"prior_b", c.prior_b}};
  j["methods"] = nlohmann::json::array();
  for (const auto& m : c.methods) j["methods"].push_back(method_to_json(m));
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.functions = j.at("functions").get<std::vector<std::string>>();
  c.design_multiplier = j.value("design_multiplier", 20);
  c.n_test = j.value("n_test", 2000);
  c.repetitions = j.value("repetitions", 20);
  c.regularity = j.value("regularity", 2);
  if (j.contains("levels")) c.levels = j["levels"].get<std::vector<double>>();
  c.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("mcmc")) {
    const auto& m = j["mcmc"];
    c.mcmc_draws = m.value("draws", 3000);
    c.prior_a = m.value("prior_a", 10.0);
    c.prior_b = m.value("prior_b", 10.0);
  }
  c.methods.clear();
  for (const auto& mj : j.at("methods")) c.methods.push_back(method_from_json(mj));
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("malformed config " + path + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid config " + path + ": " + e.what());
  }
}

inline void save_config(const ExperimentConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << config_to_json(c).dump(2) << "\n";
}

}  // namespace gpcal
