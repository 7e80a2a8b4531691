#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcrl/config.hpp"
#include "pcrl/errors.hpp"
#include "pcrl/metrics.hpp"
#include "pcrl/objective.hpp"
#include "pcrl/strategies.hpp"
#include "pcrl/synth_env.hpp"
#include "pcrl/value_model.hpp"

namespace pcrl {

struct RunTrace {
  RunConfig config;
  std::vector<MetricsRecord> records;
  PolicyState final_policy;
  std::optional<ValueModelState> final_value;
  std::int64_t total_generated = 0;
  std::int64_t total_wasted = 0;
  std::string termination;  // "budget" or "starved: <reason>"

  double final_universe_reward = 0.0;  // mean analytic success under the final policy
};

inline double universe_mean_reward(const PromptUniverse& universe, const PolicyState& policy) {
  double total = 0.0;
  for (const PromptSpec& prompt : universe.prompts) total += success_prob(policy, prompt);
  return total / static_cast<double>(universe.prompts.size());
}

// One trajectory: alternate selection, generation-time charging, the policy
// update, and (for PCL) the value update, until the budget is exhausted.
// Starvation terminates the trace with a reason instead of throwing.
inline RunTrace run(const RunConfig& config) {
  config.validate();
  RunTrace trace;
  trace.config = config;

  PromptUniverse universe = make_universe(config.universe, config.seed);
  SimContext ctx{&universe, config.cost, Rng(config.seed)};
  PolicyState policy = make_policy(universe.feature_dim);
  const PolicyState pi_ref = policy;
  ValueModelState value = make_value_model(universe.feature_dim);
  AdamState adam;
  SpeedState speed;
  GresoState greso;

  const StrategyConfig& strat = config.strategy;
  const bool is_pcl = strat.kind == StrategyConfig::Kind::kPCL;
  const bool is_speed = strat.kind == StrategyConfig::Kind::kSPEED;

  double cum_time = 0.0;

  // Pre-filter runs its one-time reference pass before the loop; the pass is
  // charged to the budget and its rollouts are never trained on.
  PromptUniverse filtered;
  if (strat.kind == StrategyConfig::Kind::kPreFilter) {
    PrefilterResult pf =
        prefilter_universe(ctx, pi_ref, strat.n_pre, strat.p_low, strat.p_high);
    cum_time += pf.sim_time_s;
    trace.total_generated += pf.generated_rollouts;
    trace.total_wasted += pf.generated_rollouts;
    filtered = std::move(pf.kept);
    ctx.universe = &filtered;
  }

  const auto budget_allows = [&](std::int64_t t) {
    if (config.budget.max_steps) return t < *config.budget.max_steps;
    return cum_time < *config.budget.max_sim_seconds;
  };

  int consecutive_no_batch = 0;
  for (std::int64_t t = 0; budget_allows(t); ++t) {
    SelectionResult sel;
    try {
      switch (strat.kind) {
        case StrategyConfig::Kind::kUniform:
        case StrategyConfig::Kind::kPreFilter:
          sel = select_uniform(ctx, policy, strat);
          break;
        case StrategyConfig::Kind::kDS:
          sel = select_ds(ctx, policy, strat);
          break;
        case StrategyConfig::Kind::kSPEED:
          sel = select_speed(ctx, policy, strat, speed);
          break;
        case StrategyConfig::Kind::kGRESO:
          sel = select_greso(ctx, policy, strat, greso);
          break;
        case StrategyConfig::Kind::kPCL:
          sel = select_pcl(ctx, policy, value, strat);
          break;
      }
    } catch (const StarvationError& e) {
      trace.termination = std::string("starved: ") + e.what();
      break;
    }

    cum_time += sel.sim_time_s;
    if (is_pcl) cum_time += config.selection_overhead_s;
    trace.total_generated += sel.generated_rollouts_total;
    trace.total_wasted += sel.wasted_rollouts;

    StepState step_state;
    step_state.step = t;
    step_state.cumulative_sim_time_s = cum_time;
    step_state.universe = ctx.universe;
    step_state.selection = &sel;
    step_state.sampling_policy = &policy;
    step_state.pi_ref = &pi_ref;
    step_state.pi_ref_sampled = config.record.pi_ref_sampled;
    step_state.pi_ref_probes = config.record.pi_ref_probes;
    step_state.pi_ref_rng = ctx.root.sub(kStreamProbe, static_cast<std::uint64_t>(t));

    if (!sel.emitted()) {
      // SPEED warmup or drained buffer: nothing to train on. The step clock
      // still advances so later completions carry measurable staleness.
      trace.records.push_back(record_step(step_state));
      if (++consecutive_no_batch > kMaxResampleRounds) {
        trace.termination = "starved: no batch emitted in " +
                            std::to_string(kMaxResampleRounds) + " consecutive steps";
        break;
      }
      GradientEstimate zero;
      zero.g.assign(policy.theta.size(), 0.0);
      zero.batch_id = policy.step;
      policy = policy_update(policy, zero, config.policy_lr);
      continue;
    }
    consecutive_no_batch = 0;

    const GradientEstimate gradient = grpo_gradient_estimate(
        policy, *ctx.universe, sel.batch,
        is_speed ? StalenessPolicy::kAllow : StalenessPolicy::kEnforce);
    step_state.gradient = &gradient;

    if (is_pcl && sel.candidate_prompt_ids.size() >= 2) {
      std::vector<double> truths;
      std::vector<double> preds;
      truths.reserve(sel.candidate_prompt_ids.size());
      preds.reserve(sel.candidate_prompt_ids.size());
      for (std::int64_t id : sel.candidate_prompt_ids) {
        const PromptSpec& prompt = ctx.prompt_by_id(id);
        truths.push_back(success_prob(policy, prompt));
        preds.push_back(predict(value, prompt));
      }
      try {
        step_state.value_ev = explained_variance(truths, preds);
      } catch (const MetricError&) {
        step_state.value_ev = std::nullopt;
      }
    }

    if (!config.record.ev_js.empty() && config.record.ev_every > 0 &&
        t % config.record.ev_every == 0) {
      for (int j : config.record.ev_js) {
        step_state.empirical_ev_by_j[j] = empirical_estimator_ev(
            *ctx.universe, policy, j,
            ctx.root.sub(kStreamEval, static_cast<std::uint64_t>(t),
                         static_cast<std::uint64_t>(j)));
      }
    }

    trace.records.push_back(record_step(step_state));

    policy = config.use_adam ? adam_update(policy, adam, gradient, config.policy_lr)
                             : policy_update(policy, gradient, config.policy_lr);
    if (is_pcl) {
      value = value_update(value, *ctx.universe, sel.batch, config.value_lr,
                           config.value_epochs);
    }
  }

  if (trace.termination.empty()) trace.termination = "budget";
  // Rollouts still sitting in SPEED's pipeline at run end were generated but
  // never trained on.
  trace.total_wasted += speed.carried_rollouts();
  trace.final_policy = std::move(policy);
  if (is_pcl) trace.final_value = std::move(value);
  trace.final_universe_reward = universe_mean_reward(*ctx.universe, trace.final_policy);
  return trace;
}

}  // namespace pcrl
