#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pcrl/objective.hpp"
#include "pcrl/report.hpp"
#include "pcrl/runner.hpp"
#include "pcrl/strategies.hpp"
#include "pcrl/synth_env.hpp"
#include "pcrl/value_model.hpp"

namespace pcrl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace selfcheck_detail {

inline PromptUniverse one_prompt(double difficulty, std::vector<double> phi) {
  PromptUniverse universe;
  universe.feature_dim = static_cast<int>(phi.size());
  PromptSpec prompt;
  prompt.id = 0;
  prompt.difficulty = difficulty;
  prompt.features = std::move(phi);
  prompt.base_length = 100;
  universe.prompts.push_back(std::move(prompt));
  return universe;
}

inline RolloutGroup group_from_mask(int mask, int n) {
  RolloutGroup group;
  group.prompt_id = 0;
  for (int j = 0; j < n; ++j) group.rewards.push_back((mask >> j) & 1);
  group.lengths.assign(static_cast<std::size_t>(n), 100);
  group.mean_reward = static_cast<double>(group.reward_sum()) / n;
  for (int r : group.rewards) group.advantages.push_back(r - group.mean_reward);
  group.sampled_at_step = 0;
  return group;
}

}  // namespace selfcheck_detail

// Exhaustive reward-outcome enumeration: E[estimator] must equal
// ((n-1)/n) p (1-p) phi to machine precision for n in {2, 3, 4}.
inline CheckResult check_gradient_enumeration() {
  using namespace selfcheck_detail;
  double worst = 0.0;
  for (int n : {2, 3, 4}) {
    for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      const double d = -std::log(p / (1.0 - p));
      PromptUniverse universe = one_prompt(d, {1.0});
      PolicyState policy = make_policy(1);
      double expected_g = 0.0;
      for (int mask = 0; mask < (1 << n); ++mask) {
        RolloutGroup group = group_from_mask(mask, n);
        const double weight =
            std::pow(p, group.reward_sum()) * std::pow(1.0 - p, n - group.reward_sum());
        const std::vector<RolloutGroup> batch{group};
        expected_g += weight * grpo_gradient_estimate(policy, universe, batch).g[0];
      }
      const double closed_form = (n - 1.0) / n * p * (1.0 - p);
      worst = std::max(worst, std::abs(expected_g - closed_form));
    }
  }
  return {"gradient-enumeration", worst < 1e-12,
          "max |E[estimator] - (n-1)/n p(1-p)| = " + format_g9(worst)};
}

// The Appendix-style p(1-p) curve peaks uniquely at p = 0.5 on a 99-point grid.
inline CheckResult check_sq_advantage_argmax() {
  double best = -1.0;
  double best_p = 0.0;
  int max_count = 0;
  for (int i = 1; i <= 99; ++i) {
    const double p = i / 100.0;
    const double v = expected_sq_advantage(p);
    if (v > best) {
      best = v;
      best_p = p;
      max_count = 1;
    } else if (v == best) {
      ++max_count;
    }
  }
  const bool ok = best_p == 0.5 && max_count == 1;
  return {"sq-advantage-argmax", ok, "argmax at p = " + format_g9(best_p)};
}

// Greedy nearest-to-target downsampling equals exhaustive subset search.
inline CheckResult check_greedy_optimality() {
  Rng rng(2024);
  for (int instance = 0; instance < 100; ++instance) {
    const std::size_t pool = 6 + static_cast<std::size_t>(rng.below(7));
    const std::size_t m = 1 + static_cast<std::size_t>(rng.below(6));
    if (m > pool) continue;
    std::vector<double> scores;
    for (std::size_t i = 0; i < pool; ++i) scores.push_back(rng.next_double());
    const double target = rng.next_double();
    double greedy_total = 0.0;
    for (std::size_t i : greedy_downsample(scores, target, m)) {
      greedy_total += std::abs(scores[i] - target);
    }
    double best = 1e300;
    for (std::uint32_t mask = 0; mask < (1u << pool); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
      double total = 0.0;
      for (std::size_t i = 0; i < pool; ++i) {
        if (mask & (1u << i)) total += std::abs(scores[i] - target);
      }
      best = std::min(best, total);
    }
    if (std::abs(greedy_total - best) > 1e-12) {
      return {"greedy-optimality", false, "suboptimal at instance " + std::to_string(instance)};
    }
  }
  return {"greedy-optimality", true, "100 random instances match exhaustive search"};
}

// The closed-form generation-time knee matches a direct scan.
inline CheckResult check_cost_knee() {
  CostModel cost;
  cost.tokens_per_second = 100.0;
  cost.capacity = 96;
  const double floor_time = generation_time(std::vector<int>(1, 500), cost);
  int scan = -1;
  for (int b = 1; b <= 8 * cost.capacity; ++b) {
    if (generation_time(std::vector<int>(static_cast<std::size_t>(b), 500), cost) >
        floor_time) {
      scan = b - 1;
      break;
    }
  }
  const bool ok = scan == static_cast<int>(equal_length_knee(cost));
  return {"cost-model-knee", ok,
          "closed form " + format_g9(equal_length_knee(cost)) + ", scan " + std::to_string(scan)};
}

// A short run replays bit-identically from the same config and seed.
inline CheckResult check_run_determinism() {
  RunConfig cfg;
  cfg.universe.num_prompts = 300;
  cfg.universe.feature_dim = 4;
  cfg.strategy.kind = StrategyConfig::Kind::kPCL;
  cfg.strategy.m = 8;
  cfg.strategy.n = 8;
  cfg.budget.max_steps = 20;
  cfg.seed = 12;
  const bool ok = trace_csv(run(cfg)) == trace_csv(run(cfg));
  return {"run-determinism", ok, ok ? "20-step PCL trace replays exactly" : "traces diverge"};
}

inline std::vector<CheckResult> run_selfchecks() {
  return {check_gradient_enumeration(), check_sq_advantage_argmax(),
          check_greedy_optimality(), check_cost_knee(), check_run_determinism()};
}

}  // namespace pcrl
