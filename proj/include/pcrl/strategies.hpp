#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcrl/errors.hpp"
#include "pcrl/objective.hpp"
#include "pcrl/synth_env.hpp"
#include "pcrl/value_model.hpp"

namespace pcrl {

// Bound on resampling rounds for strategies that reject groups; exceeding it
// on a degenerate universe raises StarvationError instead of looping.
inline constexpr int kMaxResampleRounds = 64;

// Rollout-stream nonces. Nonce 0 is the primary training draw shared by all
// strategies; resampling rounds, probes, and completions use distinct ones.
inline constexpr std::uint64_t kProbeNonce = 1ull << 20;
inline constexpr std::uint64_t kCompletionNonce = 1ull << 21;

struct StrategyConfig {
  enum class Kind { kUniform, kPreFilter, kDS, kSPEED, kGRESO, kPCL };
  Kind kind = Kind::kUniform;
  int m = 64;
  int n = 16;
  // Pre-filter
  int n_pre = 16;
  double p_low = 0.0;
  double p_high = 1.0;
  // DS / SPEED / PCL candidate oversampling
  int k = 4;
  // SPEED
  int n_init = 4;
  // GRESO
  double p_easy = 0.5;
  double p_hard = 0.5;
  double alpha_easy = 0.083;
  double alpha_hard = 0.167;
  double delta_p = 0.01;
  int replay_batch = 0;  // target prompts examined per batch; 0 means 1.5*m
  // PCL
  double tau = 0.5;

  void validate() const {
    if (m < 1) throw ConfigError("strategy: m must be >= 1");
    if (n < 2) throw ConfigError("strategy: n must be >= 2 (group baseline)");
    if (k < 1) throw ConfigError("strategy: k must be >= 1");
    if (n_init < 1 || n_init > n) throw ConfigError("strategy: need 1 <= n_init <= n");
    if (!(p_low >= 0.0 && p_low < p_high && p_high <= 1.0))
      throw ConfigError("strategy: need 0 <= p_low < p_high <= 1");
    if (tau < 0.0 || tau > 1.0) throw ConfigError("strategy: tau must be in [0,1]");
    if (delta_p < 0.0 || delta_p > 1.0) throw ConfigError("strategy: delta_p must be in [0,1]");
    if (n_pre < 1) throw ConfigError("strategy: n_pre must be >= 1");
  }
};

inline const char* strategy_name(StrategyConfig::Kind kind) {
  switch (kind) {
    case StrategyConfig::Kind::kUniform: return "uniform";
    case StrategyConfig::Kind::kPreFilter: return "prefilter";
    case StrategyConfig::Kind::kDS: return "ds";
    case StrategyConfig::Kind::kSPEED: return "speed";
    case StrategyConfig::Kind::kGRESO: return "greso";
    case StrategyConfig::Kind::kPCL: return "pcl";
  }
  return "unknown";
}

// One selection step's output: the training batch plus the generation and
// waste accounting for everything produced along the way.
struct SelectionResult {
  std::vector<RolloutGroup> batch;  // m groups of n rollouts when emitted
  std::int64_t generated_rollouts_total = 0;
  std::int64_t wasted_rollouts = 0;
  std::vector<std::int64_t> selected_prompt_ids;
  std::vector<std::int64_t> candidate_prompt_ids;  // pool examined before filtering
  std::vector<double> filter_scores;               // per-candidate selection values
  double sim_time_s = 0.0;
  double mean_staleness = 0.0;
  bool emitted() const { return !batch.empty(); }
};

// The m candidates minimizing |score - target|; ties broken by input order.
inline std::vector<std::size_t> greedy_downsample(std::span<const double> scores,
                                                  double target, std::size_t m) {
  if (scores.size() < m)
    throw ContractViolation("greedy_downsample: fewer candidates than m");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(scores[a] - target) < std::abs(scores[b] - target);
  });
  order.resize(m);
  return order;
}

inline SelectionResult select_uniform(const SimContext& ctx, const PolicyState& policy,
                                      const StrategyConfig& cfg) {
  if (static_cast<std::size_t>(cfg.m) > ctx.universe->prompts.size())
    throw ConfigError("select_uniform: m exceeds universe size");
  SelectionResult result;
  std::vector<int> lengths;
  for (std::size_t idx : ctx.sample_candidates(policy.step, static_cast<std::size_t>(cfg.m))) {
    const PromptSpec& prompt = ctx.universe->prompts[idx];
    RolloutGroup group = ctx.sample_group(policy, prompt, cfg.n);
    lengths.insert(lengths.end(), group.lengths.begin(), group.lengths.end());
    result.selected_prompt_ids.push_back(prompt.id);
    result.candidate_prompt_ids.push_back(prompt.id);
    result.batch.push_back(std::move(group));
  }
  result.generated_rollouts_total = static_cast<std::int64_t>(cfg.m) * cfg.n;
  result.wasted_rollouts = 0;
  result.sim_time_s = generation_time(lengths, ctx.cost);
  return result;
}

struct PrefilterResult {
  PromptUniverse kept;
  std::vector<double> accuracies;  // reference accuracy per original prompt
  std::int64_t generated_rollouts = 0;
  double sim_time_s = 0.0;
};

// One-time pass under a fixed reference policy: keeps prompts whose empirical
// accuracy lies strictly between p_low and p_high. The result is immutable;
// excluded prompts are never revisited.
inline PrefilterResult prefilter_universe(const SimContext& ctx, const PolicyState& pi_ref,
                                          int n_pre, double p_low, double p_high) {
  if (n_pre < 1) throw ContractViolation("prefilter_universe: n_pre must be >= 1");
  if (!(p_low >= 0.0 && p_low < p_high && p_high <= 1.0))
    throw ConfigError("prefilter_universe: need 0 <= p_low < p_high <= 1");
  PrefilterResult result;
  result.kept.config = ctx.universe->config;
  result.kept.feature_dim = ctx.universe->feature_dim;
  std::vector<int> lengths;
  const Rng root = ctx.root.sub(kStreamPrefilter);
  for (const PromptSpec& prompt : ctx.universe->prompts) {
    RolloutGroup group =
        sample_rollout_group(pi_ref, prompt, n_pre, ctx.universe->config.length,
                             ctx.cost.context_limit,
                             root.sub(static_cast<std::uint64_t>(prompt.id)));
    lengths.insert(lengths.end(), group.lengths.begin(), group.lengths.end());
    result.generated_rollouts += n_pre;
    result.accuracies.push_back(group.mean_reward);
    if (group.mean_reward > p_low && group.mean_reward < p_high) {
      PromptSpec kept = prompt;
      kept.id = static_cast<std::int64_t>(result.kept.prompts.size());
      result.kept.prompts.push_back(std::move(kept));
    }
  }
  result.sim_time_s = generation_time(lengths, ctx.cost);
  if (result.kept.prompts.empty())
    throw ConfigError("prefilter_universe: every prompt filtered out; widen (p_low, p_high)");
  result.kept.config.num_prompts = static_cast<std::int64_t>(result.kept.prompts.size());
  return result;
}

// Dynamic sampling: screen km prompts with n rollouts each, keep the
// non-unanimous groups, repeat until m are collected. Screening rollouts of
// kept groups are the training rollouts; everything else is waste.
inline SelectionResult select_ds(const SimContext& ctx, const PolicyState& policy,
                                 const StrategyConfig& cfg) {
  const std::size_t pool = static_cast<std::size_t>(cfg.k) * cfg.m;
  if (pool > ctx.universe->prompts.size())
    throw ConfigError("select_ds: k*m exceeds universe size");
  SelectionResult result;
  std::vector<RolloutGroup> buffer;
  for (int round = 0; round < kMaxResampleRounds && buffer.size() < static_cast<std::size_t>(cfg.m);
       ++round) {
    const auto nonce = static_cast<std::uint64_t>(round);
    std::vector<int> lengths;
    for (std::size_t idx : ctx.sample_candidates(policy.step, pool, nonce)) {
      const PromptSpec& prompt = ctx.universe->prompts[idx];
      RolloutGroup group = sample_rollout_group(policy, prompt, cfg.n,
                                                ctx.universe->config.length,
                                                ctx.cost.context_limit,
                                                ctx.rollout_rng(policy.step, nonce, prompt.id));
      lengths.insert(lengths.end(), group.lengths.begin(), group.lengths.end());
      result.generated_rollouts_total += cfg.n;
      result.candidate_prompt_ids.push_back(prompt.id);
      result.filter_scores.push_back(group.mean_reward);
      if (!group.unanimous()) buffer.push_back(std::move(group));
    }
    result.sim_time_s += generation_time(lengths, ctx.cost);
  }
  if (buffer.size() < static_cast<std::size_t>(cfg.m))
    throw StarvationError("select_ds: no full batch after " +
                          std::to_string(kMaxResampleRounds) + " rounds");
  buffer.resize(static_cast<std::size_t>(cfg.m));
  for (const RolloutGroup& group : buffer) result.selected_prompt_ids.push_back(group.prompt_id);
  result.batch = std::move(buffer);
  result.wasted_rollouts =
      result.generated_rollouts_total - static_cast<std::int64_t>(cfg.m) * cfg.n;
  return result;
}

// Cross-step carry for SPEED: prompts accepted by screening await their
// remaining rollouts; completed groups await emission.
struct SpeedState {
  struct Pending {
    std::int64_t prompt_id = 0;
    std::vector<int> rewards;
    std::vector<int> lengths;
    std::int64_t screen_step = 0;
  };
  struct Ready {
    RolloutGroup group;
    std::int64_t screen_step = 0;
    std::int64_t complete_step = 0;
  };
  std::vector<Pending> pending;
  std::deque<Ready> ready;

  std::int64_t carried_rollouts() const {
    std::int64_t total = 0;
    for (const Pending& p : pending) total += static_cast<std::int64_t>(p.rewards.size());
    for (const Ready& r : ready) total += r.group.n();
    return total;
  }
};

// SPEED: screen with n_init rollouts, accept mixed screenings, and complete
// accepted prompts under the current policy on a later call. Screening
// rollouts keep their original sampled_at_step, so emitted batches mix stale
// and fresh rollouts; the mean staleness is reported per batch. May emit no
// batch (warmup or drained buffer); the caller decides how to proceed.
inline SelectionResult select_speed(const SimContext& ctx, const PolicyState& policy,
                                    const StrategyConfig& cfg, SpeedState& state) {
  if (cfg.n_init == cfg.n) return select_ds(ctx, policy, cfg);  // degenerate config

  const std::size_t pool = static_cast<std::size_t>(cfg.k) * cfg.m;
  if (pool > ctx.universe->prompts.size())
    throw ConfigError("select_speed: k*m exceeds universe size");
  SelectionResult result;
  const std::int64_t now = policy.step;
  std::vector<int> lengths;

  // Complete previously accepted prompts with their remaining rollouts.
  std::uint64_t completion_slot = 0;
  for (SpeedState::Pending& pend : state.pending) {
    const PromptSpec& prompt = ctx.prompt_by_id(pend.prompt_id);
    const double p = success_prob(policy, prompt);
    Rng rng = ctx.rollout_rng(now, kCompletionNonce + completion_slot++, prompt.id);
    RolloutGroup group;
    group.prompt_id = prompt.id;
    group.sampled_at_step = pend.screen_step;
    group.rewards = std::move(pend.rewards);
    group.lengths = std::move(pend.lengths);
    for (int j = cfg.n_init; j < cfg.n; ++j) {
      Rng rj = rng.sub(static_cast<std::uint64_t>(j));
      const int r = rj.bernoulli(p) ? 1 : 0;
      group.rewards.push_back(r);
      group.lengths.push_back(sample_length(prompt, r, ctx.universe->config.length,
                                            ctx.cost.context_limit, rj));
      result.generated_rollouts_total += 1;
    }
    lengths.insert(lengths.end(), group.lengths.end() - (cfg.n - cfg.n_init),
                   group.lengths.end());
    group.mean_reward = static_cast<double>(group.reward_sum()) / cfg.n;
    group.advantages.clear();
    for (int r : group.rewards) group.advantages.push_back(r - group.mean_reward);
    state.ready.push_back({std::move(group), pend.screen_step, now});
  }
  state.pending.clear();

  // Screen a fresh pool only when the buffer cannot fill a batch.
  if (state.ready.size() < static_cast<std::size_t>(cfg.m)) {
    for (std::size_t idx : ctx.sample_candidates(now, pool)) {
      const PromptSpec& prompt = ctx.universe->prompts[idx];
      const double p = success_prob(policy, prompt);
      Rng rng = ctx.rollout_rng(now, 0, prompt.id);
      SpeedState::Pending pend;
      pend.prompt_id = prompt.id;
      pend.screen_step = now;
      int hits = 0;
      for (int j = 0; j < cfg.n_init; ++j) {
        Rng rj = rng.sub(static_cast<std::uint64_t>(j));
        const int r = rj.bernoulli(p) ? 1 : 0;
        hits += r;
        pend.rewards.push_back(r);
        pend.lengths.push_back(sample_length(prompt, r, ctx.universe->config.length,
                                             ctx.cost.context_limit, rj));
      }
      lengths.insert(lengths.end(), pend.lengths.begin(), pend.lengths.end());
      result.generated_rollouts_total += cfg.n_init;
      result.candidate_prompt_ids.push_back(prompt.id);
      result.filter_scores.push_back(static_cast<double>(hits) / cfg.n_init);
      if (hits == 0 || hits == cfg.n_init) {
        result.wasted_rollouts += cfg.n_init;  // rejected screening
      } else {
        state.pending.push_back(std::move(pend));
      }
    }
  }

  if (!lengths.empty()) result.sim_time_s = generation_time(lengths, ctx.cost);

  if (state.ready.size() >= static_cast<std::size_t>(cfg.m)) {
    double staleness_sum = 0.0;
    for (int i = 0; i < cfg.m; ++i) {
      SpeedState::Ready ready = std::move(state.ready.front());
      state.ready.pop_front();
      staleness_sum +=
          (static_cast<double>(cfg.n_init) * static_cast<double>(now - ready.screen_step) +
           static_cast<double>(cfg.n - cfg.n_init) *
               static_cast<double>(now - ready.complete_step)) /
          static_cast<double>(cfg.n);
      result.selected_prompt_ids.push_back(ready.group.prompt_id);
      result.batch.push_back(std::move(ready.group));
    }
    result.mean_staleness = staleness_sum / cfg.m;
  }
  return result;
}

// Historical-reward table for GRESO: the most recent epoch's mean reward per
// prompt, plus the adaptive skip probabilities and epoch bookkeeping.
struct GresoState {
  std::unordered_map<std::int64_t, double> last_mean;
  std::unordered_map<std::int64_t, std::int64_t> last_epoch;
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::int64_t epoch = 0;
  double q_easy = 0.0;
  double q_hard = 0.0;
  std::int64_t examined_this_epoch = 0;
  std::int64_t batches_this_epoch = 0;
  bool initialized = false;
};

namespace detail {
inline void greso_shuffle(const SimContext& ctx, GresoState& state) {
  const std::size_t n = ctx.universe->prompts.size();
  state.order.resize(n);
  std::iota(state.order.begin(), state.order.end(), std::size_t{0});
  Rng rng = ctx.root.sub(kStreamCandidates, 0xE70Cull, static_cast<std::uint64_t>(state.epoch));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::swap(state.order[i], state.order[i + static_cast<std::size_t>(rng.below(n - i))]);
  }
  state.cursor = 0;
}
}  // namespace detail

// Simplified GRESO: walk the dataset in shuffled epoch order and skip prompts
// whose last recorded epoch was unanimous, with adaptive skip probabilities
// floored so every prompt keeps at least delta_p resampling probability. All
// generated groups enter the batch, so waste is zero but unanimity can slip
// through.
inline SelectionResult select_greso(const SimContext& ctx, const PolicyState& policy,
                                    const StrategyConfig& cfg, GresoState& state) {
  if (static_cast<std::size_t>(cfg.m) > ctx.universe->prompts.size())
    throw ConfigError("select_greso: m exceeds universe size");
  if (!state.initialized) {
    state.q_easy = cfg.p_easy;
    state.q_hard = cfg.p_hard;
    detail::greso_shuffle(ctx, state);
    state.initialized = true;
  }
  const std::int64_t target =
      cfg.replay_batch > 0 ? cfg.replay_batch : (3 * static_cast<std::int64_t>(cfg.m)) / 2;
  const std::int64_t examined_bound =
      static_cast<std::int64_t>(kMaxResampleRounds) * cfg.k * cfg.m;

  SelectionResult result;
  Rng skip_rng = ctx.root.sub(kStreamSkip, static_cast<std::uint64_t>(policy.step));
  std::vector<int> lengths;
  std::int64_t examined_this_call = 0;
  while (result.batch.size() < static_cast<std::size_t>(cfg.m)) {
    if (state.cursor >= state.order.size()) {
      // Epoch boundary: nudge skip probabilities toward the target number of
      // prompts examined per batch, then reshuffle.
      if (state.batches_this_epoch > 0) {
        const double avg = static_cast<double>(state.examined_this_epoch) /
                           static_cast<double>(state.batches_this_epoch);
        const double ceiling = 1.0 - cfg.delta_p;
        if (avg > static_cast<double>(target)) {
          state.q_easy = std::max(0.0, state.q_easy - cfg.alpha_easy);
          state.q_hard = std::max(0.0, state.q_hard - cfg.alpha_hard);
        } else {
          state.q_easy = std::min(ceiling, state.q_easy + cfg.alpha_easy);
          state.q_hard = std::min(ceiling, state.q_hard + cfg.alpha_hard);
        }
      }
      state.epoch += 1;
      state.examined_this_epoch = 0;
      state.batches_this_epoch = 0;
      detail::greso_shuffle(ctx, state);
    }
    if (++examined_this_call > examined_bound)
      throw StarvationError("select_greso: no full batch within the examination bound");
    state.examined_this_epoch += 1;
    const PromptSpec& prompt = ctx.universe->prompts[state.order[state.cursor++]];
    result.candidate_prompt_ids.push_back(prompt.id);

    const auto recorded = state.last_mean.find(prompt.id);
    if (recorded != state.last_mean.end() &&
        state.last_epoch.at(prompt.id) < state.epoch) {
      double skip_prob = 0.0;
      if (recorded->second == 1.0) skip_prob = state.q_easy;
      else if (recorded->second == 0.0) skip_prob = state.q_hard;
      skip_prob = std::clamp(skip_prob, 0.0, 1.0 - cfg.delta_p);
      if (skip_prob > 0.0 && skip_rng.bernoulli(skip_prob)) continue;
    }

    RolloutGroup group = ctx.sample_group(policy, prompt, cfg.n);
    lengths.insert(lengths.end(), group.lengths.begin(), group.lengths.end());
    result.generated_rollouts_total += cfg.n;
    state.last_mean[prompt.id] = group.mean_reward;
    state.last_epoch[prompt.id] = state.epoch;
    result.selected_prompt_ids.push_back(prompt.id);
    result.batch.push_back(std::move(group));
  }
  state.batches_this_epoch += 1;
  result.sim_time_s = generation_time(lengths, ctx.cost);
  result.wasted_rollouts = 0;
  return result;
}

// PCL: score km candidates with a single value-model pass and keep the m
// closest to tau. Rollouts are generated only for the kept prompts.
inline SelectionResult select_pcl(const SimContext& ctx, const PolicyState& policy,
                                  const ValueModelState& value, const StrategyConfig& cfg) {
  const std::size_t pool = static_cast<std::size_t>(cfg.k) * cfg.m;
  if (pool > ctx.universe->prompts.size())
    throw ConfigError("select_pcl: k*m exceeds universe size");
  SelectionResult result;
  const std::vector<std::size_t> candidates = ctx.sample_candidates(policy.step, pool);
  std::vector<double> values;
  values.reserve(pool);
  for (std::size_t idx : candidates) {
    const PromptSpec& prompt = ctx.universe->prompts[idx];
    result.candidate_prompt_ids.push_back(prompt.id);
    values.push_back(predict(value, prompt));
  }
  result.filter_scores.reserve(pool);
  for (double v : values) result.filter_scores.push_back(std::abs(v - cfg.tau));

  std::vector<int> lengths;
  for (std::size_t local : greedy_downsample(values, cfg.tau, static_cast<std::size_t>(cfg.m))) {
    const PromptSpec& prompt = ctx.universe->prompts[candidates[local]];
    RolloutGroup group = ctx.sample_group(policy, prompt, cfg.n);
    lengths.insert(lengths.end(), group.lengths.begin(), group.lengths.end());
    result.selected_prompt_ids.push_back(prompt.id);
    result.batch.push_back(std::move(group));
  }
  result.generated_rollouts_total = static_cast<std::int64_t>(cfg.m) * cfg.n;
  result.wasted_rollouts = 0;
  result.sim_time_s = generation_time(lengths, ctx.cost);
  return result;
}

// Oracle-difficulty selection: estimate p(x) for an oversampled pool with
// probe rollouts, greedily keep the m prompts nearest the target, then
// generate fresh training rollouts. Probe rollouts are never reused, so they
// are wasted by construction.
inline SelectionResult oracle_difficulty_select(const SimContext& ctx,
                                                const PolicyState& policy, int m, int n,
                                                int oversample, int probes, double target) {
  if (m < 1 || n < 1 || oversample < 1 || probes < 1)
    throw ContractViolation("oracle_difficulty_select: all sizes must be >= 1");
  const std::size_t pool = static_cast<std::size_t>(oversample) * static_cast<std::size_t>(m);
  if (pool > ctx.universe->prompts.size())
    throw ConfigError("oracle_difficulty_select: oversample*m exceeds universe size");

  SelectionResult result;
  const std::vector<std::size_t> candidates = ctx.sample_candidates(policy.step, pool);
  std::vector<double> estimates;
  estimates.reserve(pool);
  std::vector<int> probe_lengths;
  for (std::size_t idx : candidates) {
    const PromptSpec& prompt = ctx.universe->prompts[idx];
    RolloutGroup probe = sample_rollout_group(policy, prompt, probes,
                                              ctx.universe->config.length,
                                              ctx.cost.context_limit,
                                              ctx.rollout_rng(policy.step, kProbeNonce, prompt.id));
    probe_lengths.insert(probe_lengths.end(), probe.lengths.begin(), probe.lengths.end());
    result.generated_rollouts_total += probes;
    result.wasted_rollouts += probes;
    result.candidate_prompt_ids.push_back(prompt.id);
    estimates.push_back(probe.mean_reward);
  }
  result.filter_scores = estimates;
  result.sim_time_s += generation_time(probe_lengths, ctx.cost);

  std::vector<int> lengths;
  for (std::size_t local : greedy_downsample(estimates, target, static_cast<std::size_t>(m))) {
    const PromptSpec& prompt = ctx.universe->prompts[candidates[local]];
    RolloutGroup group = ctx.sample_group(policy, prompt, n);
    lengths.insert(lengths.end(), group.lengths.begin(), group.lengths.end());
    result.generated_rollouts_total += n;
    result.selected_prompt_ids.push_back(prompt.id);
    result.batch.push_back(std::move(group));
  }
  result.sim_time_s += generation_time(lengths, ctx.cost);
  return result;
}

}  // namespace pcrl
