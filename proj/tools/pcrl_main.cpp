#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "pcrl/config.hpp"
#include "pcrl/report.hpp"
#include "pcrl/runner.hpp"
#include "pcrl/selfcheck.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string out;
  std::int64_t budget_steps = -1;
  double budget_sim_seconds = -1.0;
  std::string strategy;
};

void add_common_options(CLI::App* cmd, CommonOptions* opts) {
  cmd->add_option("--config", opts->config_path, "config file (key = value lines)");
  cmd->add_option("--set", opts->overrides, "override a config key, e.g. --set strategy.m=64")
      ->take_all();
  cmd->add_option("--seed", opts->seed, "run seed");
  cmd->add_option("--out", opts->out, "output path prefix");
  cmd->add_option("--budget-steps", opts->budget_steps, "stop after this many steps");
  cmd->add_option("--budget-sim-seconds", opts->budget_sim_seconds,
                  "stop once simulated generation time exceeds this");
  cmd->add_option("--strategy", opts->strategy,
                  "uniform | prefilter | ds | speed | greso | pcl");
}

pcrl::RunConfig assemble_config(const CommonOptions& opts) {
  pcrl::RunConfig cfg;
  if (!opts.config_path.empty()) cfg = pcrl::load_config_file(opts.config_path, cfg);
  for (const std::string& entry : opts.overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw pcrl::ConfigError("--set expects key=value, got '" + entry + "'");
    pcrl::apply_config_entry(cfg, entry.substr(0, eq), entry.substr(eq + 1));
  }
  if (!opts.strategy.empty()) cfg.strategy.kind = pcrl::parse_strategy_kind(opts.strategy);
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.budget_steps >= 0) {
    cfg.budget.max_steps = opts.budget_steps;
    cfg.budget.max_sim_seconds.reset();
  }
  if (opts.budget_sim_seconds >= 0.0) {
    cfg.budget.max_sim_seconds = opts.budget_sim_seconds;
    cfg.budget.max_steps.reset();
  }
  if (!opts.out.empty()) cfg.out = opts.out;
  if (!cfg.budget.max_steps && !cfg.budget.max_sim_seconds) cfg.budget.max_steps = 500;
  return cfg;
}

std::vector<std::uint64_t> seed_list(std::uint64_t first, int count) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(first + static_cast<std::uint64_t>(i));
  return seeds;
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    if (comma == std::string::npos) {
      if (pos < text.size()) out.push_back(text.substr(pos));
      break;
    }
    out.push_back(text.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
  std::vector<std::pair<int, int>> pairs;
  for (const std::string& token : split_csv(text)) {
    const auto x = token.find('x');
    if (x == std::string::npos)
      throw pcrl::ConfigError("--pairs expects MxN entries, got '" + token + "'");
    pairs.emplace_back(std::stoi(token.substr(0, x)), std::stoi(token.substr(x + 1)));
  }
  if (pairs.empty()) throw pcrl::ConfigError("--pairs is empty");
  return pairs;
}

int cmd_run(const CommonOptions& opts) {
  pcrl::RunConfig cfg = assemble_config(opts);
  if (cfg.out.empty()) cfg.out = "pcrl_run";
  const pcrl::RunTrace trace = pcrl::run(cfg);
  pcrl::write_trace_outputs(trace, cfg.out);
  std::cout << "strategy " << pcrl::strategy_name(cfg.strategy.kind) << ", seed " << cfg.seed
            << ": " << trace.records.size() << " steps, termination " << trace.termination
            << "\n"
            << "final universe reward " << pcrl::format_g9(trace.final_universe_reward)
            << ", generated " << trace.total_generated << " rollouts, wasted "
            << trace.total_wasted << "\n"
            << "wrote " << cfg.out << ".csv and " << cfg.out << ".json\n";
  return 0;
}

int cmd_sweep(const CommonOptions& opts, const std::string& pairs_text, int num_seeds,
              bool no_lr_scaling) {
  pcrl::RunConfig cfg = assemble_config(opts);
  if (cfg.out.empty()) cfg.out = "pcrl_sweep";
  if (!cfg.budget.max_sim_seconds)
    throw pcrl::ConfigError("sweep-batch needs --budget-sim-seconds (a shared time budget)");
  const auto pairs = parse_pairs(pairs_text);
  const auto seeds = seed_list(cfg.seed, num_seeds);
  const pcrl::SweepReport report = pcrl::sweep_batch_size(cfg, pairs, seeds, !no_lr_scaling);
  pcrl::write_text_file(cfg.out + ".csv", pcrl::sweep_report_csv(report));
  nlohmann::json j;
  j["config"] = pcrl::config_to_json(cfg);
  j["report"] = pcrl::sweep_report_json(report);
  pcrl::write_text_file(cfg.out + ".json", j.dump(2) + "\n");
  std::printf("%8s %6s %6s %12s %14s %16s\n", "b", "m", "n", "lr", "time/step",
              "final reward");
  for (const pcrl::SweepPoint& p : report.points) {
    std::printf("%8lld %6d %6d %12.6g %14.6g %16.6g\n", static_cast<long long>(p.b), p.m, p.n,
                p.lr, p.mean_time_per_step, p.mean_final_reward);
  }
  std::cout << "equal-length knee b* = " << report.equal_length_knee << "\n"
            << "wrote " << cfg.out << ".csv and " << cfg.out << ".json\n";
  return 0;
}

int cmd_compare(const CommonOptions& opts, const std::string& strategies_text, int num_seeds) {
  pcrl::RunConfig cfg = assemble_config(opts);
  if (cfg.out.empty()) cfg.out = "pcrl_compare";
  std::vector<pcrl::StrategyConfig> strategies;
  for (const std::string& name : split_csv(strategies_text)) {
    pcrl::StrategyConfig strat = cfg.strategy;
    strat.kind = pcrl::parse_strategy_kind(name);
    strategies.push_back(strat);
  }
  if (strategies.empty()) throw pcrl::ConfigError("--strategies is empty");
  const auto seeds = seed_list(cfg.seed, num_seeds);
  const pcrl::CompareReport report = pcrl::compare_strategies(cfg, strategies, seeds);
  pcrl::write_text_file(cfg.out + ".csv", report.long_csv);
  nlohmann::json j;
  j["config"] = pcrl::config_to_json(cfg);
  j["report"] = pcrl::compare_report_json(report);
  pcrl::write_text_file(cfg.out + ".json", j.dump(2) + "\n");
  std::printf("%10s %14s %12s %14s %24s\n", "strategy", "final reward", "eff. ratio",
              "total waste", "difficulty slope CI95");
  for (const pcrl::StrategySummary& s : report.strategies) {
    std::printf("%10s %14.6g %12.4g %14.6g [%10.3g, %10.3g]\n", s.name.c_str(),
                s.mean_final_reward, s.mean_effective_ratio, s.mean_total_waste,
                s.slope_ci_low, s.slope_ci_high);
  }
  std::cout << "wrote " << cfg.out << ".csv and " << cfg.out << ".json\n";
  return 0;
}

int cmd_ev_curve(const CommonOptions& opts, const std::string& js_text, int every) {
  pcrl::RunConfig cfg = assemble_config(opts);
  if (cfg.out.empty()) cfg.out = "pcrl_ev_curve";
  cfg.strategy.kind = pcrl::StrategyConfig::Kind::kPCL;
  cfg.record.ev_every = every;
  cfg.record.ev_js.clear();
  for (const std::string& token : split_csv(js_text)) {
    cfg.record.ev_js.push_back(std::stoi(token));
  }
  const pcrl::RunTrace trace = pcrl::run(cfg);
  pcrl::write_trace_outputs(trace, cfg.out);
  for (const pcrl::MetricsRecord& r : trace.records) {
    if (r.empirical_ev_by_j.empty()) continue;
    std::cout << "step " << r.step << ": value EV "
              << (r.value_ev ? pcrl::format_g9(*r.value_ev) : std::string("-"));
    for (const auto& [j, ev] : r.empirical_ev_by_j) {
      std::cout << ", EV_" << j << " " << pcrl::format_g9(ev);
    }
    std::cout << "\n";
  }
  std::cout << "wrote " << cfg.out << ".csv and " << cfg.out << ".json\n";
  return 0;
}

int cmd_selfcheck() {
  int failures = 0;
  for (const pcrl::CheckResult& check : pcrl::run_selfchecks()) {
    std::cout << (check.passed ? "[PASS] " : "[FAIL] ") << check.name << ": " << check.detail
              << "\n";
    if (!check.passed) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prompt-curriculum reinforcement-learning simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  CLI::App* run_cmd = app.add_subcommand("run", "run one training trajectory");
  add_common_options(run_cmd, &run_opts);

  CommonOptions sweep_opts;
  std::string pairs_text = "16x16,32x16,64x16,128x16,256x16,512x16,1024x16,1024x32,1024x64";
  int sweep_seeds = 5;
  bool no_lr_scaling = false;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep-batch", "run (m, n) decompositions to a shared time budget");
  add_common_options(sweep_cmd, &sweep_opts);
  sweep_cmd->add_option("--pairs", pairs_text, "comma-separated MxN decompositions");
  sweep_cmd->add_option("--seeds", sweep_seeds, "number of seeds (starting at --seed)");
  sweep_cmd->add_flag("--no-lr-scaling", no_lr_scaling,
                      "disable sqrt(b) learning-rate scaling across batch sizes");

  CommonOptions compare_opts;
  std::string strategies_text = "uniform,prefilter,ds,speed,greso,pcl";
  int compare_seeds = 5;
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "run several strategies on a shared universe and budget");
  add_common_options(compare_cmd, &compare_opts);
  compare_cmd->add_option("--strategies", strategies_text, "comma-separated strategy names");
  compare_cmd->add_option("--seeds", compare_seeds, "number of seeds (starting at --seed)");

  CommonOptions ev_opts;
  std::string js_text = "1,2,4,8,16";
  int ev_every = 25;
  CLI::App* ev_cmd = app.add_subcommand(
      "ev-curve", "track the value model's explained variance against j-rollout estimators");
  add_common_options(ev_cmd, &ev_opts);
  ev_cmd->add_option("--js", js_text, "comma-separated rollout counts for the estimator curve");
  ev_cmd->add_option("--every", ev_every, "steps between estimator evaluations");

  app.add_subcommand("selfcheck", "run the exact oracle suite and print pass/fail lines");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(run_opts);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts, pairs_text, sweep_seeds, no_lr_scaling);
    if (compare_cmd->parsed()) return cmd_compare(compare_opts, strategies_text, compare_seeds);
    if (ev_cmd->parsed()) return cmd_ev_curve(ev_opts, js_text, ev_every);
    return cmd_selfcheck();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
