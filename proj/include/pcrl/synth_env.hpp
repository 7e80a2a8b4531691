#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcrl/errors.hpp"
#include "pcrl/rng.hpp"

namespace pcrl {

// Probabilities are kept strictly inside (0,1) even where the sigmoid
// saturates in double precision.
inline constexpr double kProbFloor = 1e-12;

inline double sigmoid(double z) {
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

inline double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

// A synthetic prompt: latent difficulty in logit units plus the feature view
// of it that policies and value models see.
struct PromptSpec {
  std::int64_t id = 0;
  double difficulty = 0.0;            // d_x
  std::vector<double> features;       // phi; features[0] == 1 (bias)
  int base_length = 1;                // L0, tokens
};

struct DifficultyConfig {
  enum class Kind { kNormal, kMixture };
  Kind kind = Kind::kNormal;
  double mean = 0.0;
  double stddev = 1.5;
  // Second mixture component; drawn with probability 1 - weight1.
  double mean2 = 0.0;
  double stddev2 = 1.0;
  double weight1 = 1.0;
};

// Multiplicative response-length model: harder prompts and incorrect
// rollouts run longer, with lognormal noise on top.
struct LengthModel {
  double beta = 0.3;        // difficulty factor, >= 0
  double gamma = 0.5;       // incorrectness factor, >= 0
  double sigma_log = 0.25;  // lognormal noise scale; 0 disables
};

struct UniverseConfig {
  std::int64_t num_prompts = 2000;
  int feature_dim = 8;
  DifficultyConfig difficulty;
  // The difficulty feature is feature_scale * (d_x + feature_noise * eps),
  // so difficulty stays linearly recoverable from phi but neither the value
  // model nor the policy reads it exactly.
  double feature_noise = 1.5;
  double feature_scale = 0.4;
  int base_length = 200;
  double length_jitter = 0.0;  // relative uniform jitter on L0
  LengthModel length;

  void validate() const {
    if (num_prompts <= 0) throw ConfigError("universe: num_prompts must be >= 1");
    if (feature_dim < 1) throw ConfigError("universe: feature_dim must be >= 1");
    if (difficulty.stddev < 0.0 || difficulty.stddev2 < 0.0)
      throw ConfigError("universe: difficulty stddev must be >= 0");
    if (difficulty.kind == DifficultyConfig::Kind::kMixture &&
        (difficulty.weight1 < 0.0 || difficulty.weight1 > 1.0))
      throw ConfigError("universe: mixture weight must be in [0,1]");
    if (feature_noise < 0.0) throw ConfigError("universe: feature_noise must be >= 0");
    if (feature_scale <= 0.0) throw ConfigError("universe: feature_scale must be > 0");
    if (base_length < 1) throw ConfigError("universe: base_length must be >= 1");
    if (length_jitter < 0.0 || length_jitter >= 1.0)
      throw ConfigError("universe: length_jitter must be in [0,1)");
    if (length.beta < 0.0 || length.gamma < 0.0 || length.sigma_log < 0.0)
      throw ConfigError("universe: length model factors must be >= 0");
  }
};

struct PromptUniverse {
  std::vector<PromptSpec> prompts;
  UniverseConfig config;
  int feature_dim = 0;
};

// Logistic policy over prompt features. Replaced, never mutated, by updates.
struct PolicyState {
  std::vector<double> theta;
  std::int64_t step = 0;
};

inline PolicyState make_policy(int feature_dim) {
  return PolicyState{std::vector<double>(static_cast<std::size_t>(feature_dim), 0.0), 0};
}

// n binary-reward rollouts for one prompt, with group-mean advantages.
struct RolloutGroup {
  std::int64_t prompt_id = 0;
  std::vector<int> rewards;      // each in {0,1}
  std::vector<int> lengths;      // tokens, each in [1, context limit]
  double mean_reward = 0.0;      // p_hat
  std::vector<double> advantages;
  std::int64_t sampled_at_step = 0;

  int n() const { return static_cast<int>(rewards.size()); }
  int reward_sum() const {
    int s = 0;
    for (int r : rewards) s += r;
    return s;
  }
  bool unanimous() const {
    const int s = reward_sum();
    return s == 0 || s == n();
  }
};

// Two-regime generation-time model: per-stream latency vs aggregate
// throughput, whichever dominates.
struct CostModel {
  double tokens_per_second = 50.0;  // R, per concurrent stream
  int capacity = 2048;              // C, streams servable at full rate
  int context_limit = 4096;         // L_max, tokens

  void validate() const {
    if (tokens_per_second <= 0.0) throw ConfigError("cost: tokens_per_second must be > 0");
    if (capacity < 1) throw ConfigError("cost: capacity must be >= 1");
    if (context_limit < 1) throw ConfigError("cost: context_limit must be >= 1");
  }
};

inline double sample_difficulty(const DifficultyConfig& cfg, Rng& rng) {
  if (cfg.kind == DifficultyConfig::Kind::kNormal) {
    return rng.normal(cfg.mean, cfg.stddev);
  }
  if (rng.next_double() < cfg.weight1) return rng.normal(cfg.mean, cfg.stddev);
  return rng.normal(cfg.mean2, cfg.stddev2);
}

// Deterministic given (config, seed). Each prompt draws from its own
// substream, so universes are reproducible prompt-by-prompt.
inline PromptUniverse make_universe(const UniverseConfig& config, std::uint64_t seed) {
  config.validate();
  PromptUniverse universe;
  universe.config = config;
  universe.feature_dim = config.feature_dim;
  universe.prompts.reserve(static_cast<std::size_t>(config.num_prompts));

  const Rng root = Rng(seed).sub(kStreamUniverse);
  for (std::int64_t i = 0; i < config.num_prompts; ++i) {
    Rng rng = root.sub(static_cast<std::uint64_t>(i));
    PromptSpec prompt;
    prompt.id = i;
    prompt.difficulty = sample_difficulty(config.difficulty, rng);
    prompt.features.assign(static_cast<std::size_t>(config.feature_dim), 0.0);
    prompt.features[0] = 1.0;
    if (config.feature_dim >= 2) {
      prompt.features[1] = config.feature_scale *
                           (prompt.difficulty + config.feature_noise * rng.normal());
    }
    for (int f = 2; f < config.feature_dim; ++f) {
      prompt.features[static_cast<std::size_t>(f)] = rng.normal();
    }
    if (config.length_jitter > 0.0) {
      const double lo = config.base_length * (1.0 - config.length_jitter);
      const double hi = config.base_length * (1.0 + config.length_jitter);
      prompt.base_length = std::max(1, static_cast<int>(std::lround(
                                           lo + (hi - lo) * rng.next_double())));
    } else {
      prompt.base_length = config.base_length;
    }
    universe.prompts.push_back(std::move(prompt));
  }
  return universe;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// p_theta(x) = sigmoid(theta . phi(x) - d_x); strictly inside (0,1).
inline double success_prob(const PolicyState& policy, const PromptSpec& prompt) {
  if (policy.theta.size() != prompt.features.size())
    throw ContractViolation("success_prob: theta/phi dimension mismatch");
  return sigmoid(dot(policy.theta, prompt.features) - prompt.difficulty);
}

inline int sample_length(const PromptSpec& prompt, int reward, const LengthModel& model,
                         int max_tokens, Rng& rng) {
  double factor = 1.0 + model.beta * softplus(prompt.difficulty) +
                  model.gamma * (reward == 0 ? 1.0 : 0.0);
  if (model.sigma_log > 0.0) factor *= std::exp(model.sigma_log * rng.normal());
  const long raw = std::lround(prompt.base_length * factor);
  return static_cast<int>(std::clamp<long>(raw, 1, max_tokens));
}

// n independent Bernoulli(success_prob) rollouts. `rng` identifies the group
// substream; rollout j draws from rng.sub(j), so each (step, prompt, rollout)
// stream is independent of every other.
inline RolloutGroup sample_rollout_group(const PolicyState& policy, const PromptSpec& prompt,
                                         int n, const LengthModel& length_model,
                                         int max_tokens, const Rng& rng) {
  if (n < 1) throw ContractViolation("sample_rollout_group: n must be >= 1");
  const double p = success_prob(policy, prompt);
  RolloutGroup group;
  group.prompt_id = prompt.id;
  group.sampled_at_step = policy.step;
  group.rewards.reserve(static_cast<std::size_t>(n));
  group.lengths.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    Rng rj = rng.sub(static_cast<std::uint64_t>(j));
    const int r = rj.bernoulli(p) ? 1 : 0;
    group.rewards.push_back(r);
    group.lengths.push_back(sample_length(prompt, r, length_model, max_tokens, rj));
  }
  const double p_hat = static_cast<double>(group.reward_sum()) / n;
  group.mean_reward = p_hat;
  group.advantages.reserve(static_cast<std::size_t>(n));
  for (int r : group.rewards) group.advantages.push_back(r - p_hat);
  return group;
}

// t = max(longest rollout latency, aggregate throughput time). Nondecreasing
// in every length and under batch growth.
inline double generation_time(std::span<const int> lengths, const CostModel& cost) {
  if (lengths.empty()) throw ContractViolation("generation_time: empty batch");
  long long total = 0;
  int longest = 0;
  for (int len : lengths) {
    total += len;
    longest = std::max(longest, len);
  }
  const double latency = longest / cost.tokens_per_second;
  const double throughput = static_cast<double>(total) /
                            (static_cast<double>(cost.capacity) * cost.tokens_per_second);
  return std::max(latency, throughput);
}

// For equal-length batches the latency and throughput terms cross exactly at
// b = capacity, independent of the common length.
inline double equal_length_knee(const CostModel& cost) {
  return static_cast<double>(cost.capacity);
}

// Bundles the pieces every strategy needs to generate rollouts: the prompt
// universe, the cost model, and the run's root random stream.
struct SimContext {
  const PromptUniverse* universe = nullptr;
  CostModel cost;
  Rng root;

  const PromptSpec& prompt_by_id(std::int64_t id) const {
    return universe->prompts[static_cast<std::size_t>(id)];
  }

  // Rollout substream for (step, nonce, prompt). Nonce 0 is the primary
  // training draw; resampling rounds and probe passes use distinct nonces.
  Rng rollout_rng(std::int64_t step, std::uint64_t nonce, std::int64_t prompt_id) const {
    return root.sub(kStreamRollout, static_cast<std::uint64_t>(step), nonce,
                    static_cast<std::uint64_t>(prompt_id));
  }

  Rng candidate_rng(std::int64_t step, std::uint64_t nonce) const {
    return root.sub(kStreamCandidates, static_cast<std::uint64_t>(step), nonce);
  }

  RolloutGroup sample_group(const PolicyState& policy, const PromptSpec& prompt, int n,
                            std::uint64_t nonce = 0) const {
    return sample_rollout_group(policy, prompt, n, universe->config.length,
                                cost.context_limit,
                                rollout_rng(policy.step, nonce, prompt.id));
  }

  // Ordered sample of k distinct prompt indices (partial Fisher-Yates).
  std::vector<std::size_t> sample_candidates(std::int64_t step, std::size_t k,
                                             std::uint64_t nonce = 0) const {
    const std::size_t n = universe->prompts.size();
    if (k > n) throw ConfigError("candidate pool larger than universe");
    Rng rng = candidate_rng(step, nonce);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }
};

}  // namespace pcrl
