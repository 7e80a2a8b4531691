#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pcrl/errors.hpp"
#include "pcrl/synth_env.hpp"

namespace pcrl {

struct GradientEstimate {
  std::vector<double> g;
  std::int64_t contributing_rollouts = 0;  // rollouts with nonzero advantage
  std::int64_t batch_id = 0;               // policy step the batch trained
};

// A(x,y) = r - p_hat with the group-mean baseline. Idempotent; matches the
// advantages stored at sampling time.
inline std::vector<double> advantages(const RolloutGroup& group) {
  std::vector<double> out;
  out.reserve(group.rewards.size());
  const double p_hat = static_cast<double>(group.reward_sum()) / group.n();
  for (int r : group.rewards) out.push_back(r - p_hat);
  return out;
}

enum class StalenessPolicy {
  kEnforce,  // refuse rollouts sampled under a different policy step
  kAllow,    // accept them; the caller measures the staleness instead
};

// Sequence-level on-policy gradient estimator:
//   g = (1/(m n)) sum_ij A(x_i, y_ij) * grad log pi(y_ij | x_i)
// where grad log pi = (1-p) phi on reward 1 and -p phi on reward 0.
// Unanimous groups contribute exactly zero.
inline GradientEstimate grpo_gradient_estimate(
    const PolicyState& policy, const PromptUniverse& universe,
    std::span<const RolloutGroup> batch,
    StalenessPolicy staleness = StalenessPolicy::kEnforce) {
  if (batch.empty()) throw ContractViolation("grpo_gradient_estimate: empty batch");
  GradientEstimate estimate;
  estimate.g.assign(policy.theta.size(), 0.0);
  estimate.batch_id = policy.step;

  std::int64_t total_rollouts = 0;
  for (const RolloutGroup& group : batch) {
    if (staleness == StalenessPolicy::kEnforce &&
        group.sampled_at_step != policy.step) {
      throw StalenessError("grpo_gradient_estimate: group sampled at step " +
                           std::to_string(group.sampled_at_step) +
                           " but policy is at step " + std::to_string(policy.step));
    }
    total_rollouts += group.n();
    if (group.unanimous()) continue;

    const PromptSpec& prompt = universe.prompts[static_cast<std::size_t>(group.prompt_id)];
    const double p = success_prob(policy, prompt);
    const double p_hat = static_cast<double>(group.reward_sum()) / group.n();
    double coeff = 0.0;
    for (int r : group.rewards) coeff += (r - p_hat) * (r - p);
    for (std::size_t f = 0; f < estimate.g.size(); ++f) {
      estimate.g[f] += coeff * prompt.features[f];
    }
    estimate.contributing_rollouts += group.n();
  }
  if (total_rollouts > 0) {
    for (double& v : estimate.g) v /= static_cast<double>(total_rollouts);
  }
  return estimate;
}

// Exact gradient of E[r] = p for the logistic policy: p(1-p) phi.
inline std::vector<double> analytic_gradient(const PolicyState& policy,
                                             const PromptSpec& prompt) {
  const double p = success_prob(policy, prompt);
  std::vector<double> g(prompt.features.size());
  for (std::size_t f = 0; f < g.size(); ++f) g[f] = p * (1.0 - p) * prompt.features[f];
  return g;
}

// Gradient ascent. Returns a new state; the input is unchanged.
inline PolicyState policy_update(const PolicyState& policy, const GradientEstimate& estimate,
                                 double lr) {
  if (lr <= 0.0) throw ContractViolation("policy_update: lr must be > 0");
  if (estimate.g.size() != policy.theta.size())
    throw ContractViolation("policy_update: gradient dimension mismatch");
  for (double v : estimate.g) {
    if (!std::isfinite(v)) throw UpdateRejected("policy_update: non-finite gradient");
  }
  PolicyState next = policy;
  for (std::size_t f = 0; f < next.theta.size(); ++f) next.theta[f] += lr * estimate.g[f];
  next.step = policy.step + 1;
  return next;
}

// Adam-style variant, off by default; moments live outside PolicyState so
// states stay plain values.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline PolicyState adam_update(const PolicyState& policy, AdamState& adam,
                               const GradientEstimate& estimate, double lr) {
  if (lr <= 0.0) throw ContractViolation("adam_update: lr must be > 0");
  for (double g : estimate.g) {
    if (!std::isfinite(g)) throw UpdateRejected("adam_update: non-finite gradient");
  }
  if (adam.m.empty()) {
    adam.m.assign(policy.theta.size(), 0.0);
    adam.v.assign(policy.theta.size(), 0.0);
  }
  adam.t += 1;
  PolicyState next = policy;
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));
  for (std::size_t f = 0; f < next.theta.size(); ++f) {
    adam.m[f] = adam.beta1 * adam.m[f] + (1.0 - adam.beta1) * estimate.g[f];
    adam.v[f] = adam.beta2 * adam.v[f] + (1.0 - adam.beta2) * estimate.g[f] * estimate.g[f];
    next.theta[f] += lr * (adam.m[f] / bc1) / (std::sqrt(adam.v[f] / bc2) + adam.eps);
  }
  next.step = policy.step + 1;
  return next;
}

// Fraction of rollouts carrying nonzero advantage. With binary rewards this
// is exactly the fraction of rollouts in non-unanimous groups, so it is
// computed from reward counts rather than float comparisons.
inline double effective_ratio(std::span<const RolloutGroup> batch) {
  if (batch.empty()) throw ContractViolation("effective_ratio: empty batch");
  std::int64_t contributing = 0;
  std::int64_t total = 0;
  for (const RolloutGroup& group : batch) {
    total += group.n();
    if (!group.unanimous()) contributing += group.n();
  }
  return static_cast<double>(contributing) / static_cast<double>(total);
}

// E_y[A(x,y)^2] = p(1-p) for a binary reward with the exact baseline.
inline double expected_sq_advantage(double p) {
  if (p < 0.0 || p > 1.0) throw ContractViolation("expected_sq_advantage: p outside [0,1]");
  return p * (1.0 - p);
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace pcrl
