#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pcrl/errors.hpp"
#include "pcrl/rng.hpp"
#include "pcrl/synth_env.hpp"

namespace pcrl {

// Online value model V(x) = sigmoid(w . phi(x)), trained one step behind the
// policy on the batch's own rollouts.
struct ValueModelState {
  std::vector<double> w;
  std::int64_t trained_through_step = -1;
};

inline ValueModelState make_value_model(int feature_dim) {
  return ValueModelState{std::vector<double>(static_cast<std::size_t>(feature_dim), 0.0), -1};
}

inline double predict(const ValueModelState& value, const PromptSpec& prompt) {
  if (value.w.size() != prompt.features.size())
    throw ContractViolation("predict: w/phi dimension mismatch");
  return sigmoid(dot(value.w, prompt.features));
}

// Full-batch gradient descent on the squared error between V(x) and the
// group mean reward, using only the batch's existing rollouts. The gradient
// is mean-normalized over the batch so lr is independent of m.
inline ValueModelState value_update(const ValueModelState& value,
                                    const PromptUniverse& universe,
                                    std::span<const RolloutGroup> batch, double lr,
                                    int epochs = 1) {
  if (batch.empty()) throw ContractViolation("value_update: empty batch");
  if (lr <= 0.0) throw ContractViolation("value_update: lr must be > 0");
  if (epochs < 1) throw ContractViolation("value_update: epochs must be >= 1");

  ValueModelState next = value;
  const double inv_m = 1.0 / static_cast<double>(batch.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<double> grad(next.w.size(), 0.0);
    double loss = 0.0;
    for (const RolloutGroup& group : batch) {
      const PromptSpec& prompt = universe.prompts[static_cast<std::size_t>(group.prompt_id)];
      const double v = predict(next, prompt);
      const double err = v - group.mean_reward;
      loss += err * err;
      const double coeff = 2.0 * err * v * (1.0 - v) * inv_m;
      for (std::size_t f = 0; f < grad.size(); ++f) grad[f] += coeff * prompt.features[f];
    }
    if (!std::isfinite(loss)) throw UpdateRejected("value_update: non-finite loss");
    for (std::size_t f = 0; f < next.w.size(); ++f) next.w[f] -= lr * grad[f];
  }
  std::int64_t batch_step = batch.front().sampled_at_step;
  for (const RolloutGroup& group : batch) {
    batch_step = std::max(batch_step, group.sampled_at_step);
  }
  next.trained_through_step = batch_step;
  return next;
}

inline double population_variance(std::span<const double> xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return var / static_cast<double>(xs.size());
}

// 1 - Var(truth - pred) / Var(truth). 1 for a perfect predictor, 0 for the
// constant-at-mean predictor, negative when worse than that.
inline double explained_variance(std::span<const double> truths,
                                 std::span<const double> preds) {
  if (truths.size() != preds.size() || truths.size() < 2)
    throw ContractViolation("explained_variance: need two same-length lists");
  const double truth_var = population_variance(truths);
  if (truth_var == 0.0) throw MetricError("explained_variance: zero truth variance");
  std::vector<double> residual(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) residual[i] = truths[i] - preds[i];
  return 1.0 - population_variance(residual) / truth_var;
}

// Explained variance of the j-rollout empirical mean as a difficulty
// estimator, with the analytic success probability as ground truth.
inline double empirical_estimator_ev(const PromptUniverse& universe,
                                     const PolicyState& policy, int samples_per_prompt,
                                     const Rng& rng) {
  if (samples_per_prompt < 1)
    throw ContractViolation("empirical_estimator_ev: samples_per_prompt must be >= 1");
  std::vector<double> truths;
  std::vector<double> preds;
  truths.reserve(universe.prompts.size());
  preds.reserve(universe.prompts.size());
  for (const PromptSpec& prompt : universe.prompts) {
    const double p = success_prob(policy, prompt);
    Rng prompt_rng = rng.sub(static_cast<std::uint64_t>(prompt.id));
    int hits = 0;
    for (int j = 0; j < samples_per_prompt; ++j) {
      if (prompt_rng.sub(static_cast<std::uint64_t>(j)).bernoulli(p)) ++hits;
    }
    truths.push_back(p);
    preds.push_back(static_cast<double>(hits) / samples_per_prompt);
  }
  return explained_variance(truths, preds);
}

// Closed form for the same quantity: 1 - E_x[p(1-p)] / (j Var_x(p)), with the
// moments taken over the realized universe.
inline double empirical_estimator_ev_analytic(const PromptUniverse& universe,
                                              const PolicyState& policy, int samples_per_prompt) {
  if (samples_per_prompt < 1)
    throw ContractViolation("empirical_estimator_ev_analytic: samples_per_prompt must be >= 1");
  std::vector<double> ps;
  ps.reserve(universe.prompts.size());
  double mean_pq = 0.0;
  for (const PromptSpec& prompt : universe.prompts) {
    const double p = success_prob(policy, prompt);
    ps.push_back(p);
    mean_pq += p * (1.0 - p);
  }
  mean_pq /= static_cast<double>(ps.size());
  const double var_p = population_variance(ps);
  if (var_p == 0.0) throw MetricError("empirical_estimator_ev_analytic: zero truth variance");
  return 1.0 - mean_pq / (samples_per_prompt * var_p);
}

}  // namespace pcrl
