#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcrl/errors.hpp"
#include "pcrl/objective.hpp"
#include "pcrl/rng.hpp"
#include "pcrl/strategies.hpp"
#include "pcrl/synth_env.hpp"

namespace pcrl {

// Per-step observables. Optional fields serialize as empty CSV cells.
struct MetricsRecord {
  std::int64_t step = 0;
  double cumulative_sim_time_s = 0.0;
  double train_reward_pre_filter = std::numeric_limits<double>::quiet_NaN();
  double train_reward_post_filter = std::numeric_limits<double>::quiet_NaN();
  double effective_ratio = 0.0;
  double grad_norm = 0.0;
  std::optional<double> value_ev;
  std::map<int, double> empirical_ev_by_j;
  std::int64_t wasted_rollouts = 0;
  double mean_staleness = 0.0;
  double pi_ref_difficulty_of_selected = std::numeric_limits<double>::quiet_NaN();
};

inline const char* metrics_csv_header() {
  return "step,cumulative_sim_time_s,train_reward_pre_filter,train_reward_post_filter,"
         "effective_ratio,grad_norm,value_ev,empirical_ev_by_j,wasted_rollouts,"
         "mean_staleness,pi_ref_difficulty_of_selected";
}

// Floating-point fields use 9 significant digits; undefined values are empty.
inline std::string format_g9(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string metrics_csv_row(const MetricsRecord& r) {
  std::string row;
  row += std::to_string(r.step);
  row += ',';
  row += format_g9(r.cumulative_sim_time_s);
  row += ',';
  row += format_g9(r.train_reward_pre_filter);
  row += ',';
  row += format_g9(r.train_reward_post_filter);
  row += ',';
  row += format_g9(r.effective_ratio);
  row += ',';
  row += format_g9(r.grad_norm);
  row += ',';
  if (r.value_ev) row += format_g9(*r.value_ev);
  row += ',';
  bool first = true;
  for (const auto& [j, ev] : r.empirical_ev_by_j) {
    if (!first) row += ';';
    row += std::to_string(j);
    row += ':';
    row += format_g9(ev);
    first = false;
  }
  row += ',';
  row += std::to_string(r.wasted_rollouts);
  row += ',';
  row += format_g9(r.mean_staleness);
  row += ',';
  row += format_g9(r.pi_ref_difficulty_of_selected);
  return row;
}

// Mean reference-policy success over the selected prompts, exact.
inline double pi_ref_difficulty_analytic(const PromptUniverse& universe,
                                         std::span<const std::int64_t> selected_ids,
                                         const PolicyState& pi_ref) {
  if (selected_ids.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::int64_t id : selected_ids) {
    total += success_prob(pi_ref, universe.prompts[static_cast<std::size_t>(id)]);
  }
  return total / static_cast<double>(selected_ids.size());
}

// The same quantity estimated with `probes` Bernoulli draws per prompt.
inline double pi_ref_difficulty_sampled(const PromptUniverse& universe,
                                        std::span<const std::int64_t> selected_ids,
                                        const PolicyState& pi_ref, int probes,
                                        const Rng& rng) {
  if (selected_ids.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::int64_t id : selected_ids) {
    const double p = success_prob(pi_ref, universe.prompts[static_cast<std::size_t>(id)]);
    Rng prompt_rng = rng.sub(static_cast<std::uint64_t>(id));
    int hits = 0;
    for (int j = 0; j < probes; ++j) {
      if (prompt_rng.sub(static_cast<std::uint64_t>(j)).bernoulli(p)) ++hits;
    }
    total += static_cast<double>(hits) / probes;
  }
  return total / static_cast<double>(selected_ids.size());
}

// State of one completed step, from which the record's fields derive.
struct StepState {
  std::int64_t step = 0;
  double cumulative_sim_time_s = 0.0;
  const PromptUniverse* universe = nullptr;
  const SelectionResult* selection = nullptr;
  const GradientEstimate* gradient = nullptr;   // null on no-train steps
  const PolicyState* sampling_policy = nullptr; // policy the batch was drawn under
  const PolicyState* pi_ref = nullptr;
  std::optional<double> value_ev;
  std::map<int, double> empirical_ev_by_j;
  bool pi_ref_sampled = false;
  int pi_ref_probes = 16;
  Rng pi_ref_rng;
};

inline MetricsRecord record_step(const StepState& state) {
  MetricsRecord r;
  r.step = state.step;
  r.cumulative_sim_time_s = state.cumulative_sim_time_s;
  r.wasted_rollouts = state.selection->wasted_rollouts;
  r.mean_staleness = state.selection->mean_staleness;
  r.value_ev = state.value_ev;
  r.empirical_ev_by_j = state.empirical_ev_by_j;

  if (!state.selection->candidate_prompt_ids.empty()) {
    double total = 0.0;
    for (std::int64_t id : state.selection->candidate_prompt_ids) {
      total += success_prob(*state.sampling_policy,
                            state.universe->prompts[static_cast<std::size_t>(id)]);
    }
    r.train_reward_pre_filter =
        total / static_cast<double>(state.selection->candidate_prompt_ids.size());
  }
  if (state.selection->emitted()) {
    double total = 0.0;
    for (const RolloutGroup& group : state.selection->batch) total += group.mean_reward;
    r.train_reward_post_filter = total / static_cast<double>(state.selection->batch.size());
    r.effective_ratio = effective_ratio(state.selection->batch);
    if (state.pi_ref_sampled) {
      r.pi_ref_difficulty_of_selected =
          pi_ref_difficulty_sampled(*state.universe, state.selection->selected_prompt_ids,
                                    *state.pi_ref, state.pi_ref_probes, state.pi_ref_rng);
    } else {
      r.pi_ref_difficulty_of_selected = pi_ref_difficulty_analytic(
          *state.universe, state.selection->selected_prompt_ids, *state.pi_ref);
    }
  }
  if (state.gradient != nullptr) r.grad_norm = l2_norm(state.gradient->g);
  return r;
}

}  // namespace pcrl
