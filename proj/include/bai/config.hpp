#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bai/error.hpp"
#include "bai/harness.hpp"
#include "bai/models.hpp"
#include "bai/strategies.hpp"

namespace bai {

/// Default RS-family parameters by instance source: catalogue scenarios use the
/// two-arm replication settings (50 initialization pulls per arm, gamma mixing
/// on), case recipes the multi-arm settings (10 pulls per arm, mixing off),
/// explicit instances the generic settings (1 pull per arm, mixing off).
inline StrategyParams default_params(const InstanceSource& source) {
  StrategyParams p;
  if (std::holds_alternative<ScenarioRef>(source)) {
    p.init_rounds_per_arm = 50;
    p.gamma_mixing = true;
  } else if (std::holds_alternative<CaseRecipe>(source)) {
    p.init_rounds_per_arm = 10;
    p.gamma_mixing = false;
  }
  return p;
}

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void field_error(const std::string& field, const std::string& message) {
  throw Error("config field \"" + field + "\": " + message);
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) field_error(path + key, "missing");
  return *it;
}

inline double get_number(const json& v, const std::string& field) {
  if (!v.is_number()) field_error(field, "expected a number");
  return v.get<double>();
}

inline std::size_t get_count(const json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    field_error(field, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline bool get_bool(const json& v, const std::string& field) {
  if (!v.is_boolean()) field_error(field, "expected true or false");
  return v.get<bool>();
}

inline void reject_unknown(const json& obj, const std::set<std::string>& known,
                           const std::string& path) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) field_error(path + key, "unknown field");
  }
}

inline ArmDistribution parse_arm(const json& v, const std::string& path) {
  if (!v.is_object()) field_error(path, "expected an object");
  const json& type = require(v, "type", path + ".");
  if (type == "gaussian") {
    reject_unknown(v, {"type", "mean", "variance"}, path + ".");
    const double mean = get_number(require(v, "mean", path + "."), path + ".mean");
    const double var = get_number(require(v, "variance", path + "."), path + ".variance");
    if (!(var > 0.0)) field_error(path + ".variance", "must be positive");
    return ArmDistribution::gaussian(mean, var);
  }
  if (type == "bernoulli") {
    reject_unknown(v, {"type", "p"}, path + ".");
    const double p = get_number(require(v, "p", path + "."), path + ".p");
    if (!(p >= 0.0 && p <= 1.0)) field_error(path + ".p", "must lie in [0, 1]");
    return ArmDistribution::bernoulli(p);
  }
  field_error(path + ".type", "expected \"gaussian\" or \"bernoulli\"");
}

inline InstanceSource parse_instance(const json& root) {
  const int given = static_cast<int>(root.contains("instance")) +
                    static_cast<int>(root.contains("scenario")) +
                    static_cast<int>(root.contains("case"));
  if (given != 1) field_error("instance", "give exactly one of instance, scenario, case");

  if (root.contains("scenario")) {
    const json& v = root["scenario"];
    if (!v.is_string()) field_error("scenario", "expected a string s1..s8");
    try {
      return ScenarioRef{parse_scenario_id(v.get<std::string>())};
    } catch (const Error& e) {
      field_error("scenario", e.what());
    }
  }
  if (root.contains("case")) {
    const json& v = root["case"];
    if (!v.is_object()) field_error("case", "expected an object {id, K, param}");
    reject_unknown(v, {"id", "K", "param"}, "case.");
    const json& id = require(v, "id", "case.");
    if (!id.is_string()) field_error("case.id", "expected a string case1..case6");
    CaseRecipe recipe;
    try {
      recipe.id = parse_case_id(id.get<std::string>());
    } catch (const Error& e) {
      field_error("case.id", e.what());
    }
    recipe.arms = get_count(require(v, "K", "case."), "case.K");
    recipe.param = get_number(require(v, "param", "case."), "case.param");
    try {
      validate(recipe);
    } catch (const Error& e) {
      field_error("case", e.what());
    }
    return recipe;
  }
  const json& arms = root["instance"];
  if (!arms.is_array()) field_error("instance", "expected an array of arms");
  std::vector<ArmDistribution> parsed;
  for (std::size_t i = 0; i < arms.size(); ++i) {
    parsed.push_back(parse_arm(arms[i], "instance[" + std::to_string(i) + "]"));
  }
  if (parsed.size() < 2) field_error("instance", "need at least two arms");
  return BanditInstance(std::move(parsed));
}

inline StrategySpec parse_strategy(const json& v, const StrategyParams& defaults,
                                   const std::string& path) {
  StrategySpec spec;
  spec.params = defaults;
  const json* obj = nullptr;
  if (v.is_string()) {
    spec.id = v.get<std::string>();
  } else if (v.is_object()) {
    obj = &v;
    reject_unknown(v, {"id", "C_mu", "C_sigma2", "C_w", "init_rounds", "gamma_mixing", "ugap_a"},
                   path + ".");
    const json& id = require(v, "id", path + ".");
    if (!id.is_string()) field_error(path + ".id", "expected a string");
    spec.id = id.get<std::string>();
  } else {
    field_error(path, "expected a strategy id or an object with an \"id\"");
  }
  const auto& ids = strategy_ids();
  if (std::find(ids.begin(), ids.end(), spec.id) == ids.end()) {
    field_error(path + ".id", "unknown strategy \"" + spec.id + "\"");
  }
  if (obj != nullptr) {
    if (obj->contains("C_mu")) spec.params.c_mu = get_number((*obj)["C_mu"], path + ".C_mu");
    if (obj->contains("C_sigma2")) {
      spec.params.c_sigma2 = get_number((*obj)["C_sigma2"], path + ".C_sigma2");
    }
    if (obj->contains("C_w")) spec.params.c_w = get_number((*obj)["C_w"], path + ".C_w");
    if (obj->contains("init_rounds")) {
      spec.params.init_rounds_per_arm = get_count((*obj)["init_rounds"], path + ".init_rounds");
    }
    if (obj->contains("gamma_mixing")) {
      spec.params.gamma_mixing = get_bool((*obj)["gamma_mixing"], path + ".gamma_mixing");
    }
    if (obj->contains("ugap_a")) {
      spec.ugap_exploration = get_number((*obj)["ugap_a"], path + ".ugap_a");
    }
  }
  if (is_rs_family(spec.id)) spec.params.estimator = estimator_for(spec.id);
  return spec;
}

inline std::vector<std::size_t> parse_rounds(const json& v, const std::string& field) {
  if (!v.is_array()) field_error(field, "expected an array of rounds");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(get_count(v[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

}  // namespace detail

/// Builds an ExperimentConfig from its JSON document. Errors name the field.
inline ExperimentConfig parse_config(const nlohmann::json& root) {
  using detail::field_error;
  if (!root.is_object()) throw Error("config: expected a JSON object");
  detail::reject_unknown(root,
                         {"instance", "scenario", "case", "strategies", "T", "trials", "seed",
                          "record_every", "record_rounds", "diagnostics", "checkpoints"},
                         "");
  ExperimentConfig config;
  config.instance = detail::parse_instance(root);
  config.horizon = detail::get_count(detail::require(root, "T", ""), "T");
  if (config.horizon < 1) field_error("T", "must be >= 1");
  config.trials = detail::get_count(detail::require(root, "trials", ""), "trials");
  if (config.trials < 1) field_error("trials", "must be >= 1");
  const auto& seed = detail::require(root, "seed", "");
  if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() &&
                                    seed.get<long long>() < 0)) {
    field_error("seed", "expected a non-negative 64-bit integer");
  }
  config.seed = seed.get<std::uint64_t>();

  const auto& strategies = detail::require(root, "strategies", "");
  if (!strategies.is_array() || strategies.empty()) {
    field_error("strategies", "expected a non-empty array");
  }
  const StrategyParams defaults = default_params(config.instance);
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    config.strategies.push_back(
        detail::parse_strategy(strategies[i], defaults, "strategies[" + std::to_string(i) + "]"));
  }

  if (root.contains("record_every") && root.contains("record_rounds")) {
    field_error("record_rounds", "give at most one of record_every, record_rounds");
  }
  if (root.contains("record_every")) {
    const std::size_t step = detail::get_count(root["record_every"], "record_every");
    if (step < 1) field_error("record_every", "must be >= 1");
    config.record_rounds = every_nth_round(config.horizon, step);
  } else if (root.contains("record_rounds")) {
    config.record_rounds = detail::parse_rounds(root["record_rounds"], "record_rounds");
  } else {
    config.record_rounds = default_record_schedule(config.horizon);
  }
  if (root.contains("diagnostics")) {
    config.diagnostics = detail::get_bool(root["diagnostics"], "diagnostics");
  }
  if (root.contains("checkpoints")) {
    config.checkpoints = detail::parse_rounds(root["checkpoints"], "checkpoints");
  }

  check_schedule(config.record_rounds, config.horizon, "record_rounds");
  check_schedule(config.checkpoints, config.horizon, "checkpoints");
  for (std::size_t i = 0; i < config.strategies.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (config.strategies[i].id == config.strategies[j].id) {
        field_error("strategies[" + std::to_string(i) + "].id",
                    "duplicate strategy id \"" + config.strategies[i].id + "\"");
      }
    }
  }
  for (const auto& spec : config.strategies) {
    try {
      if (is_rs_family(spec.id)) {
        const std::size_t k = std::visit(
            [](const auto& s) -> std::size_t {
              using T = std::decay_t<decltype(s)>;
              if constexpr (std::is_same_v<T, BanditInstance>) {
                return s.size();
              } else if constexpr (std::is_same_v<T, ScenarioRef>) {
                return 2;
              } else {
                return s.arms;
              }
            },
            config.instance);
        validate(spec.params, k);
      }
    } catch (const Error& e) {
      field_error("strategies", spec.id + ": " + e.what());
    }
  }
  return config;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(root);
}

}  // namespace bai
