#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcrl/runner.hpp"
#include "pcrl/stats.hpp"

namespace pcrl {

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["universe"]["num_prompts"] = c.universe.num_prompts;
  j["universe"]["feature_dim"] = c.universe.feature_dim;
  j["universe"]["difficulty"]["kind"] =
      c.universe.difficulty.kind == DifficultyConfig::Kind::kNormal ? "normal" : "mixture";
  j["universe"]["difficulty"]["mean"] = c.universe.difficulty.mean;
  j["universe"]["difficulty"]["stddev"] = c.universe.difficulty.stddev;
  j["universe"]["difficulty"]["mean2"] = c.universe.difficulty.mean2;
  j["universe"]["difficulty"]["stddev2"] = c.universe.difficulty.stddev2;
  j["universe"]["difficulty"]["weight1"] = c.universe.difficulty.weight1;
  j["universe"]["feature_noise"] = c.universe.feature_noise;
  j["universe"]["feature_scale"] = c.universe.feature_scale;
  j["universe"]["base_length"] = c.universe.base_length;
  j["universe"]["length_jitter"] = c.universe.length_jitter;
  j["universe"]["length"]["beta"] = c.universe.length.beta;
  j["universe"]["length"]["gamma"] = c.universe.length.gamma;
  j["universe"]["length"]["sigma_log"] = c.universe.length.sigma_log;
  j["cost"]["tokens_per_second"] = c.cost.tokens_per_second;
  j["cost"]["capacity"] = c.cost.capacity;
  j["cost"]["context_limit"] = c.cost.context_limit;
  j["strategy"]["kind"] = strategy_name(c.strategy.kind);
  j["strategy"]["m"] = c.strategy.m;
  j["strategy"]["n"] = c.strategy.n;
  j["strategy"]["k"] = c.strategy.k;
  j["strategy"]["n_pre"] = c.strategy.n_pre;
  j["strategy"]["p_low"] = c.strategy.p_low;
  j["strategy"]["p_high"] = c.strategy.p_high;
  j["strategy"]["n_init"] = c.strategy.n_init;
  j["strategy"]["p_easy"] = c.strategy.p_easy;
  j["strategy"]["p_hard"] = c.strategy.p_hard;
  j["strategy"]["alpha_easy"] = c.strategy.alpha_easy;
  j["strategy"]["alpha_hard"] = c.strategy.alpha_hard;
  j["strategy"]["delta_p"] = c.strategy.delta_p;
  j["strategy"]["replay_batch"] = c.strategy.replay_batch;
  j["strategy"]["tau"] = c.strategy.tau;
  j["policy_lr"] = c.policy_lr;
  j["value_lr"] = c.value_lr;
  j["value_epochs"] = c.value_epochs;
  j["use_adam"] = c.use_adam;
  if (c.budget.max_steps) j["budget"]["max_steps"] = *c.budget.max_steps;
  if (c.budget.max_sim_seconds) j["budget"]["max_sim_seconds"] = *c.budget.max_sim_seconds;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["record"]["pi_ref_sampled"] = c.record.pi_ref_sampled;
  j["record"]["pi_ref_probes"] = c.record.pi_ref_probes;
  j["record"]["ev_js"] = c.record.ev_js;
  j["record"]["ev_every"] = c.record.ev_every;
  j["selection_overhead_s"] = c.selection_overhead_s;
  return j;
}

inline std::string trace_csv(const RunTrace& trace) {
  std::string out = metrics_csv_header();
  out += '\n';
  for (const MetricsRecord& r : trace.records) {
    out += metrics_csv_row(r);
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
}

inline nlohmann::json trace_summary_json(const RunTrace& trace) {
  nlohmann::json summary;
  summary["steps_recorded"] = trace.records.size();
  summary["termination"] = trace.termination;
  summary["total_generated_rollouts"] = trace.total_generated;
  summary["total_wasted_rollouts"] = trace.total_wasted;
  summary["final_universe_reward"] = trace.final_universe_reward;
  summary["final_policy_step"] = trace.final_policy.step;
  if (!trace.records.empty()) {
    summary["cumulative_sim_time_s"] = trace.records.back().cumulative_sim_time_s;
    double er = 0.0;
    double post = 0.0;
    std::int64_t trained_steps = 0;
    for (const MetricsRecord& r : trace.records) {
      if (!std::isnan(r.train_reward_post_filter)) {
        post += r.train_reward_post_filter;
        er += r.effective_ratio;
        ++trained_steps;
      }
    }
    if (trained_steps > 0) {
      summary["mean_effective_ratio"] = er / static_cast<double>(trained_steps);
      summary["mean_train_reward_post_filter"] = post / static_cast<double>(trained_steps);
    }
  }
  if (trace.final_value) {
    summary["value_trained_through_step"] = trace.final_value->trained_through_step;
  }
  return summary;
}

// One CSV of the metrics trace plus a JSON sidecar echoing the config.
inline void write_trace_outputs(const RunTrace& trace, const std::string& out_prefix) {
  write_text_file(out_prefix + ".csv", trace_csv(trace));
  nlohmann::json j;
  j["config"] = config_to_json(trace.config);
  j["summary"] = trace_summary_json(trace);
  write_text_file(out_prefix + ".json", j.dump(2) + "\n");
}

namespace detail {

// Runs one configuration per (variant, seed) pair on a small thread pool;
// results come back in input order.
template <typename Job>
std::vector<RunTrace> run_parallel(const std::vector<Job>& jobs) {
  std::vector<std::future<RunTrace>> futures;
  futures.reserve(jobs.size());
  for (const Job& job : jobs) {
    futures.push_back(std::async(std::launch::async, [job]() { return run(job); }));
  }
  std::vector<RunTrace> traces;
  traces.reserve(jobs.size());
  for (auto& f : futures) traces.push_back(f.get());
  return traces;
}

}  // namespace detail

struct SweepPoint {
  int m = 0;
  int n = 0;
  std::int64_t b = 0;
  double lr = 0.0;
  std::vector<double> final_reward_by_seed;
  std::vector<double> time_per_step_by_seed;
  double mean_final_reward = 0.0;
  double mean_time_per_step = 0.0;
};

struct SweepReport {
  std::vector<SweepPoint> points;
  double equal_length_knee = 0.0;
  bool lr_sqrt_scaling = true;
  std::int64_t lr_reference_b = 0;
};

// Runs each (m, n) decomposition to the same simulated-time budget across a
// shared seed set. Learning rates scale as sqrt(b / reference) by default,
// mirroring per-batch-size tuning; disable for a fixed-lr sweep.
inline SweepReport sweep_batch_size(const RunConfig& base,
                                    std::span<const std::pair<int, int>> pairs,
                                    std::span<const std::uint64_t> seeds,
                                    bool lr_sqrt_scaling = true) {
  if (!base.budget.max_sim_seconds)
    throw ConfigError("sweep_batch_size: base config needs budget.max_sim_seconds");
  SweepReport report;
  report.equal_length_knee = equal_length_knee(base.cost);
  report.lr_sqrt_scaling = lr_sqrt_scaling;
  report.lr_reference_b =
      static_cast<std::int64_t>(base.strategy.m) * base.strategy.n;

  std::vector<RunConfig> jobs;
  for (const auto& [m, n] : pairs) {
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.strategy.m = m;
      cfg.strategy.n = n;
      cfg.seed = seed;
      cfg.out.clear();
      const double b = static_cast<double>(m) * n;
      if (lr_sqrt_scaling) {
        cfg.policy_lr =
            base.policy_lr * std::sqrt(b / static_cast<double>(report.lr_reference_b));
      }
      jobs.push_back(std::move(cfg));
    }
  }
  const std::vector<RunTrace> traces = detail::run_parallel(jobs);

  std::size_t idx = 0;
  for (const auto& [m, n] : pairs) {
    SweepPoint point;
    point.m = m;
    point.n = n;
    point.b = static_cast<std::int64_t>(m) * n;
    for (std::size_t s = 0; s < seeds.size(); ++s, ++idx) {
      const RunTrace& trace = traces[idx];
      point.lr = trace.config.policy_lr;
      point.final_reward_by_seed.push_back(trace.final_universe_reward);
      const double steps = static_cast<double>(trace.records.size());
      const double total_time =
          trace.records.empty() ? 0.0 : trace.records.back().cumulative_sim_time_s;
      point.time_per_step_by_seed.push_back(steps > 0 ? total_time / steps : 0.0);
    }
    point.mean_final_reward = mean(point.final_reward_by_seed);
    point.mean_time_per_step = mean(point.time_per_step_by_seed);
    report.points.push_back(std::move(point));
  }
  return report;
}

inline nlohmann::json sweep_report_json(const SweepReport& report) {
  nlohmann::json j;
  j["equal_length_knee"] = report.equal_length_knee;
  j["lr_sqrt_scaling"] = report.lr_sqrt_scaling;
  j["lr_reference_b"] = report.lr_reference_b;
  for (const SweepPoint& p : report.points) {
    nlohmann::json pj;
    pj["m"] = p.m;
    pj["n"] = p.n;
    pj["b"] = p.b;
    pj["lr"] = p.lr;
    pj["final_reward_by_seed"] = p.final_reward_by_seed;
    pj["time_per_step_by_seed"] = p.time_per_step_by_seed;
    pj["mean_final_reward"] = p.mean_final_reward;
    pj["mean_time_per_step"] = p.mean_time_per_step;
    j["points"].push_back(pj);
  }
  return j;
}

inline std::string sweep_report_csv(const SweepReport& report) {
  std::string out = "b,m,n,lr,seed_index,final_reward,time_per_step\n";
  for (const SweepPoint& p : report.points) {
    for (std::size_t s = 0; s < p.final_reward_by_seed.size(); ++s) {
      out += std::to_string(p.b) + "," + std::to_string(p.m) + "," + std::to_string(p.n) +
             "," + format_g9(p.lr) + "," + std::to_string(s) + "," +
             format_g9(p.final_reward_by_seed[s]) + "," +
             format_g9(p.time_per_step_by_seed[s]) + "\n";
    }
  }
  return out;
}

struct StrategySummary {
  std::string name;
  std::vector<double> final_reward_by_seed;
  std::vector<double> mean_effective_ratio_by_seed;
  std::vector<double> total_waste_by_seed;
  std::vector<double> difficulty_slope_by_seed;
  double mean_final_reward = 0.0;
  double mean_effective_ratio = 0.0;
  double mean_total_waste = 0.0;
  double mean_difficulty_slope = 0.0;
  double slope_ci_low = 0.0;
  double slope_ci_high = 0.0;
};

struct CompareReport {
  std::vector<StrategySummary> strategies;
  std::string long_csv;  // run,seed,step,metric,value rows aligned on sim time
};

inline double trace_difficulty_slope(const RunTrace& trace) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const MetricsRecord& r : trace.records) {
    if (std::isnan(r.pi_ref_difficulty_of_selected)) continue;
    xs.push_back(static_cast<double>(r.step));
    ys.push_back(r.pi_ref_difficulty_of_selected);
  }
  if (xs.size() < 2) return 0.0;
  return ols_slope(xs, ys);
}

inline double trace_mean_effective_ratio(const RunTrace& trace) {
  double er = 0.0;
  std::int64_t steps = 0;
  for (const MetricsRecord& r : trace.records) {
    if (std::isnan(r.train_reward_post_filter)) continue;
    er += r.effective_ratio;
    ++steps;
  }
  return steps > 0 ? er / static_cast<double>(steps) : 0.0;
}

// Per-strategy traces over a shared universe and budget, summarized by final
// reward, waste, effective ratio, and the reference-difficulty trend slope.
inline CompareReport compare_strategies(const RunConfig& base,
                                        std::span<const StrategyConfig> strategies,
                                        std::span<const std::uint64_t> seeds) {
  std::vector<RunConfig> jobs;
  for (const StrategyConfig& strat : strategies) {
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.strategy = strat;
      cfg.seed = seed;
      cfg.out.clear();
      jobs.push_back(std::move(cfg));
    }
  }
  const std::vector<RunTrace> traces = detail::run_parallel(jobs);

  CompareReport report;
  report.long_csv = "run,seed,step,metric,value\n";
  std::size_t idx = 0;
  for (const StrategyConfig& strat : strategies) {
    StrategySummary summary;
    summary.name = strategy_name(strat.kind);
    for (std::size_t s = 0; s < seeds.size(); ++s, ++idx) {
      const RunTrace& trace = traces[idx];
      summary.final_reward_by_seed.push_back(trace.final_universe_reward);
      summary.mean_effective_ratio_by_seed.push_back(trace_mean_effective_ratio(trace));
      summary.total_waste_by_seed.push_back(static_cast<double>(trace.total_wasted));
      summary.difficulty_slope_by_seed.push_back(trace_difficulty_slope(trace));
      for (const MetricsRecord& r : trace.records) {
        const std::string prefix = summary.name + "," + std::to_string(seeds[s]) + "," +
                                   std::to_string(r.step) + ",";
        report.long_csv += prefix + "cumulative_sim_time_s," +
                           format_g9(r.cumulative_sim_time_s) + "\n";
        if (!std::isnan(r.train_reward_post_filter)) {
          report.long_csv +=
              prefix + "train_reward_post_filter," + format_g9(r.train_reward_post_filter) + "\n";
          report.long_csv += prefix + "effective_ratio," + format_g9(r.effective_ratio) + "\n";
        }
        if (!std::isnan(r.pi_ref_difficulty_of_selected)) {
          report.long_csv += prefix + "pi_ref_difficulty_of_selected," +
                             format_g9(r.pi_ref_difficulty_of_selected) + "\n";
        }
        report.long_csv += prefix + "wasted_rollouts," +
                           std::to_string(r.wasted_rollouts) + "\n";
      }
    }
    summary.mean_final_reward = mean(summary.final_reward_by_seed);
    summary.mean_effective_ratio = mean(summary.mean_effective_ratio_by_seed);
    summary.mean_total_waste = mean(summary.total_waste_by_seed);
    summary.mean_difficulty_slope = mean(summary.difficulty_slope_by_seed);
    if (summary.difficulty_slope_by_seed.size() >= 2) {
      const auto [lo, hi] = mean_confidence_interval95(summary.difficulty_slope_by_seed);
      summary.slope_ci_low = lo;
      summary.slope_ci_high = hi;
    }
    report.strategies.push_back(std::move(summary));
  }
  return report;
}

inline nlohmann::json compare_report_json(const CompareReport& report) {
  nlohmann::json j;
  for (const StrategySummary& s : report.strategies) {
    nlohmann::json sj;
    sj["name"] = s.name;
    sj["final_reward_by_seed"] = s.final_reward_by_seed;
    sj["mean_final_reward"] = s.mean_final_reward;
    sj["mean_effective_ratio"] = s.mean_effective_ratio;
    sj["mean_total_waste"] = s.mean_total_waste;
    sj["mean_difficulty_slope"] = s.mean_difficulty_slope;
    sj["slope_ci95"] = {s.slope_ci_low, s.slope_ci_high};
    j["strategies"].push_back(sj);
  }
  return j;
}

}  // namespace pcrl
