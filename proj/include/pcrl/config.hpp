#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pcrl/errors.hpp"
#include "pcrl/strategies.hpp"
#include "pcrl/synth_env.hpp"

namespace pcrl {

// Exactly one of the two budgets is set.
struct BudgetConfig {
  std::optional<std::int64_t> max_steps;
  std::optional<double> max_sim_seconds;
};

struct RecordConfig {
  bool pi_ref_sampled = false;  // analytic reference difficulty by default
  int pi_ref_probes = 16;
  std::vector<int> ev_js;       // empirical-estimator EV curve, e.g. {1,2,4,8,16}
  int ev_every = 25;            // steps between EV-curve evaluations
};

struct RunConfig {
  UniverseConfig universe;
  CostModel cost;
  StrategyConfig strategy;
  double policy_lr = 0.01;
  double value_lr = 0.2;
  int value_epochs = 1;
  bool use_adam = false;
  BudgetConfig budget;
  std::uint64_t seed = 1;
  std::string out;
  RecordConfig record;
  double selection_overhead_s = 0.0;  // flat per-step charge for value-model passes

  void validate() const {
    universe.validate();
    cost.validate();
    strategy.validate();
    if (policy_lr <= 0.0) throw ConfigError("run: policy_lr must be > 0");
    if (value_lr <= 0.0) throw ConfigError("run: value_lr must be > 0");
    if (value_epochs < 1) throw ConfigError("run: value_epochs must be >= 1");
    if (budget.max_steps.has_value() == budget.max_sim_seconds.has_value())
      throw ConfigError("run: set exactly one of budget.max_steps / budget.max_sim_seconds");
    if (budget.max_steps && *budget.max_steps < 0)
      throw ConfigError("run: budget.max_steps must be >= 0");
    if (budget.max_sim_seconds && *budget.max_sim_seconds < 0.0)
      throw ConfigError("run: budget.max_sim_seconds must be >= 0");
    if (selection_overhead_s < 0.0) throw ConfigError("run: selection_overhead_s must be >= 0");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for " + key + ": '" + value + "'");
  }
}

inline std::int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value for " + key + ": '" + value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config: bad boolean value for " + key + ": '" + value + "'");
}

}  // namespace detail

inline StrategyConfig::Kind parse_strategy_kind(const std::string& name) {
  if (name == "uniform") return StrategyConfig::Kind::kUniform;
  if (name == "prefilter") return StrategyConfig::Kind::kPreFilter;
  if (name == "ds") return StrategyConfig::Kind::kDS;
  if (name == "speed") return StrategyConfig::Kind::kSPEED;
  if (name == "greso") return StrategyConfig::Kind::kGRESO;
  if (name == "pcl") return StrategyConfig::Kind::kPCL;
  throw ConfigError("config: unknown strategy '" + name + "'");
}

// Applies a single `key = value` assignment. Keys mirror RunConfig fields.
inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;

  if (key == "universe.num_prompts") cfg.universe.num_prompts = parse_int(key, value);
  else if (key == "universe.feature_dim") cfg.universe.feature_dim = static_cast<int>(parse_int(key, value));
  else if (key == "universe.difficulty.kind") {
    if (value == "normal") cfg.universe.difficulty.kind = DifficultyConfig::Kind::kNormal;
    else if (value == "mixture") cfg.universe.difficulty.kind = DifficultyConfig::Kind::kMixture;
    else throw ConfigError("config: unknown difficulty kind '" + value + "'");
  }
  else if (key == "universe.difficulty.mean") cfg.universe.difficulty.mean = parse_double(key, value);
  else if (key == "universe.difficulty.stddev") cfg.universe.difficulty.stddev = parse_double(key, value);
  else if (key == "universe.difficulty.mean2") cfg.universe.difficulty.mean2 = parse_double(key, value);
  else if (key == "universe.difficulty.stddev2") cfg.universe.difficulty.stddev2 = parse_double(key, value);
  else if (key == "universe.difficulty.weight1") cfg.universe.difficulty.weight1 = parse_double(key, value);
  else if (key == "universe.feature_noise") cfg.universe.feature_noise = parse_double(key, value);
  else if (key == "universe.feature_scale") cfg.universe.feature_scale = parse_double(key, value);
  else if (key == "universe.base_length") cfg.universe.base_length = static_cast<int>(parse_int(key, value));
  else if (key == "universe.length_jitter") cfg.universe.length_jitter = parse_double(key, value);
  else if (key == "universe.length.beta") cfg.universe.length.beta = parse_double(key, value);
  else if (key == "universe.length.gamma") cfg.universe.length.gamma = parse_double(key, value);
  else if (key == "universe.length.sigma_log") cfg.universe.length.sigma_log = parse_double(key, value);
  else if (key == "cost.tokens_per_second") cfg.cost.tokens_per_second = parse_double(key, value);
  else if (key == "cost.capacity") cfg.cost.capacity = static_cast<int>(parse_int(key, value));
  else if (key == "cost.context_limit") cfg.cost.context_limit = static_cast<int>(parse_int(key, value));
  else if (key == "strategy.kind") cfg.strategy.kind = parse_strategy_kind(value);
  else if (key == "strategy.m") cfg.strategy.m = static_cast<int>(parse_int(key, value));
  else if (key == "strategy.n") cfg.strategy.n = static_cast<int>(parse_int(key, value));
  else if (key == "strategy.k") cfg.strategy.k = static_cast<int>(parse_int(key, value));
  else if (key == "strategy.n_pre") cfg.strategy.n_pre = static_cast<int>(parse_int(key, value));
  else if (key == "strategy.p_low") cfg.strategy.p_low = parse_double(key, value);
  else if (key == "strategy.p_high") cfg.strategy.p_high = parse_double(key, value);
  else if (key == "strategy.n_init") cfg.strategy.n_init = static_cast<int>(parse_int(key, value));
  else if (key == "strategy.p_easy") cfg.strategy.p_easy = parse_double(key, value);
  else if (key == "strategy.p_hard") cfg.strategy.p_hard = parse_double(key, value);
  else if (key == "strategy.alpha_easy") cfg.strategy.alpha_easy = parse_double(key, value);
  else if (key == "strategy.alpha_hard") cfg.strategy.alpha_hard = parse_double(key, value);
  else if (key == "strategy.delta_p") cfg.strategy.delta_p = parse_double(key, value);
  else if (key == "strategy.replay_batch") cfg.strategy.replay_batch = static_cast<int>(parse_int(key, value));
  else if (key == "strategy.tau") cfg.strategy.tau = parse_double(key, value);
  else if (key == "policy_lr") cfg.policy_lr = parse_double(key, value);
  else if (key == "value_lr") cfg.value_lr = parse_double(key, value);
  else if (key == "value_epochs") cfg.value_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "use_adam") cfg.use_adam = parse_bool(key, value);
  else if (key == "budget.max_steps") {
    cfg.budget.max_steps = parse_int(key, value);
    cfg.budget.max_sim_seconds.reset();
  }
  else if (key == "budget.max_sim_seconds") {
    cfg.budget.max_sim_seconds = parse_double(key, value);
    cfg.budget.max_steps.reset();
  }
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "out") cfg.out = value;
  else if (key == "record.pi_ref_sampled") cfg.record.pi_ref_sampled = parse_bool(key, value);
  else if (key == "record.pi_ref_probes") cfg.record.pi_ref_probes = static_cast<int>(parse_int(key, value));
  else if (key == "record.ev_every") cfg.record.ev_every = static_cast<int>(parse_int(key, value));
  else if (key == "selection_overhead_s") cfg.selection_overhead_s = parse_double(key, value);
  else throw ConfigError("config: unknown key '" + key + "'");
}

// Flat `key = value` format; '#' starts a comment.
inline RunConfig parse_config(std::istream& in, RunConfig base = RunConfig{}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
    apply_config_entry(base, detail::trim(line.substr(0, eq)),
                       detail::trim(line.substr(eq + 1)));
  }
  return base;
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = RunConfig{}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  return parse_config(in, std::move(base));
}

}  // namespace pcrl
