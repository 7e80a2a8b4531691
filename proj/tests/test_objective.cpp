#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "pcrl/objective.hpp"
#include "pcrl/rng.hpp"
#include "pcrl/synth_env.hpp"

using namespace pcrl;

namespace {

PromptUniverse single_prompt_universe(double difficulty, std::vector<double> features) {
  PromptUniverse universe;
  universe.feature_dim = static_cast<int>(features.size());
  PromptSpec prompt;
  prompt.id = 0;
  prompt.difficulty = difficulty;
  prompt.features = std::move(features);
  prompt.base_length = 100;
  universe.prompts.push_back(std::move(prompt));
  return universe;
}

RolloutGroup make_group(std::vector<int> rewards, std::int64_t step) {
  RolloutGroup group;
  group.prompt_id = 0;
  group.rewards = std::move(rewards);
  group.lengths.assign(group.rewards.size(), 100);
  group.mean_reward =
      static_cast<double>(group.reward_sum()) / static_cast<double>(group.n());
  for (int r : group.rewards) group.advantages.push_back(r - group.mean_reward);
  group.sampled_at_step = step;
  return group;
}

// Exhaustive-enumeration oracle: E over all 2^n reward outcomes of the
// group-mean-baseline estimator, computed from first principles.
std::vector<double> enumerate_expected_estimator(double p, int n,
                                                 const std::vector<double>& phi) {
  std::vector<double> expected(phi.size(), 0.0);
  for (int mask = 0; mask < (1 << n); ++mask) {
    int ones = 0;
    for (int j = 0; j < n; ++j) ones += (mask >> j) & 1;
    const double weight = std::pow(p, ones) * std::pow(1.0 - p, n - ones);
    const double p_hat = static_cast<double>(ones) / n;
    double coeff = 0.0;
    for (int j = 0; j < n; ++j) {
      const int r = (mask >> j) & 1;
      const double score = r == 1 ? (1.0 - p) : -p;  // d log pi / d (theta . phi)
      coeff += (r - p_hat) * score;
    }
    for (std::size_t f = 0; f < phi.size(); ++f) {
      expected[f] += weight * coeff / n * phi[f];
    }
  }
  return expected;
}

}  // namespace

TEST_CASE("advantages: anchor cases") {
  CHECK(advantages(make_group({1, 1, 1, 1}, 0)) == std::vector<double>{0, 0, 0, 0});
  CHECK(advantages(make_group({0, 1}, 0)) == std::vector<double>{-0.5, 0.5});
  const auto a = advantages(make_group({1, 0, 1, 1}, 0));
  CHECK(a[0] == doctest::Approx(0.25));
  CHECK(a[1] == doctest::Approx(-0.75));
  CHECK(a[2] == doctest::Approx(0.25));
  CHECK(a[3] == doctest::Approx(0.25));
}

TEST_CASE("estimator expectation matches the enumeration oracle for n in {2,3,4}") {
  // The self-inclusive group-mean baseline scales the analytic gradient by
  // (n-1)/n; verified outcome-by-outcome through the implementation.
  const std::vector<double> phi{1.0, -0.5};
  for (int n : {2, 3, 4}) {
    for (double p : {0.1, 0.3, 0.5, 0.6, 0.9}) {
      const double d = -std::log(p / (1.0 - p));  // difficulty realizing p at theta = 0
      PromptUniverse universe = single_prompt_universe(d, phi);
      PolicyState policy{{0.0, 0.0}, 0};
      REQUIRE(success_prob(policy, universe.prompts[0]) == doctest::Approx(p).epsilon(1e-12));

      const std::vector<double> oracle = enumerate_expected_estimator(p, n, phi);
      std::vector<double> via_impl(phi.size(), 0.0);
      for (int mask = 0; mask < (1 << n); ++mask) {
        std::vector<int> rewards;
        int ones = 0;
        for (int j = 0; j < n; ++j) {
          const int r = (mask >> j) & 1;
          rewards.push_back(r);
          ones += r;
        }
        const double weight = std::pow(p, ones) * std::pow(1.0 - p, n - ones);
        const std::vector<RolloutGroup> batch{make_group(rewards, 0)};
        const GradientEstimate estimate = grpo_gradient_estimate(policy, universe, batch);
        for (std::size_t f = 0; f < phi.size(); ++f) via_impl[f] += weight * estimate.g[f];
      }
      const double scale = (static_cast<double>(n) - 1.0) / n * p * (1.0 - p);
      for (std::size_t f = 0; f < phi.size(); ++f) {
        CHECK(via_impl[f] == doctest::Approx(oracle[f]).epsilon(1e-12));
        CHECK(via_impl[f] == doctest::Approx(scale * phi[f]).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("n=2 closed form: E[g] = 0.5 p(1-p) phi, 0.12 at p=0.6") {
  const std::vector<double> oracle = enumerate_expected_estimator(0.6, 2, {1.0});
  CHECK(oracle[0] == doctest::Approx(0.12).epsilon(1e-12));
}

TEST_CASE("Monte Carlo estimator mean matches the oracle at n=2, p=0.6") {
  const std::vector<double> phi{1.0};
  const double p = 0.6;
  const double d = -std::log(p / (1.0 - p));
  PromptUniverse universe = single_prompt_universe(d, phi);
  PolicyState policy{{0.0}, 0};
  const LengthModel lm;
  const Rng root(31);
  double total = 0.0;
  const int groups = 100000;
  for (int g = 0; g < groups; ++g) {
    const std::vector<RolloutGroup> batch{
        sample_rollout_group(policy, universe.prompts[0], 2, lm, 4096,
                             root.sub(static_cast<std::uint64_t>(g)))};
    total += grpo_gradient_estimate(policy, universe, batch).g[0];
  }
  CHECK(std::abs(total / groups - 0.12) / 0.12 < 0.02);
}

TEST_CASE("all-failure batch gives the exact zero vector") {
  PromptUniverse universe = single_prompt_universe(0.0, {1.0, 2.0});
  PolicyState policy{{0.0, 0.0}, 0};
  const std::vector<RolloutGroup> batch{make_group({0, 0}, 0)};
  const GradientEstimate estimate = grpo_gradient_estimate(policy, universe, batch);
  CHECK(estimate.g == std::vector<double>{0.0, 0.0});
  CHECK(estimate.contributing_rollouts == 0);
}

TEST_CASE("stale groups are refused unless explicitly allowed") {
  PromptUniverse universe = single_prompt_universe(0.0, {1.0});
  PolicyState policy{{0.0}, 4};
  const std::vector<RolloutGroup> batch{make_group({0, 1}, 3)};
  CHECK_THROWS_AS(grpo_gradient_estimate(policy, universe, batch), StalenessError);
  CHECK_NOTHROW(grpo_gradient_estimate(policy, universe, batch, StalenessPolicy::kAllow));
}

TEST_CASE("analytic gradient anchor values") {
  PolicyState policy{{0.0, 0.0}, 0};
  PromptSpec prompt;
  prompt.features = {1.0, 0.0};
  prompt.difficulty = 0.0;
  const auto g = analytic_gradient(policy, prompt);
  CHECK(g[0] == doctest::Approx(0.25));
  CHECK(g[1] == doctest::Approx(0.0));

  prompt.difficulty = 40.0;  // p near the floor: vanishing signal
  CHECK(l2_norm(analytic_gradient(policy, prompt)) < 1e-10);
  prompt.difficulty = -40.0;
  CHECK(l2_norm(analytic_gradient(policy, prompt)) < 1e-10);

  prompt.features = {1.0, -2.0};
  prompt.difficulty = std::log(3.0);  // p = 0.25
  CHECK(l2_norm(analytic_gradient(policy, prompt)) ==
        doctest::Approx(0.1875 * std::sqrt(5.0)).epsilon(1e-9));
}

TEST_CASE("analytic gradient matches central finite differences") {
  PromptSpec prompt;
  prompt.features = {1.0, -0.7, 0.3};
  prompt.difficulty = 0.4;
  const PolicyState policy{{0.2, 0.1, -0.5}, 0};
  const auto g = analytic_gradient(policy, prompt);
  const double h = 1e-6;
  for (std::size_t f = 0; f < g.size(); ++f) {
    PolicyState up = policy;
    PolicyState down = policy;
    up.theta[f] += h;
    down.theta[f] -= h;
    const double fd = (success_prob(up, prompt) - success_prob(down, prompt)) / (2 * h);
    if (std::abs(g[f]) > 1e-12) {
      CHECK(std::abs(fd - g[f]) / std::abs(g[f]) < 1e-5);
    } else {
      CHECK(std::abs(fd) < 1e-9);
    }
  }
}

TEST_CASE("policy_update arithmetic and immutability") {
  const PolicyState policy{{0.0, 0.0}, 7};
  GradientEstimate zero;
  zero.g = {0.0, 0.0};
  const PolicyState after_zero = policy_update(policy, zero, 0.1);
  CHECK(after_zero.theta == policy.theta);
  CHECK(after_zero.step == 8);
  CHECK(policy.step == 7);  // input unchanged

  GradientEstimate g;
  g.g = {1.0, 0.0};
  const PolicyState moved = policy_update(policy, g, 0.1);
  CHECK(moved.theta[0] == doctest::Approx(0.1));
  CHECK(moved.theta[1] == doctest::Approx(0.0));

  GradientEstimate bad;
  bad.g = {std::nan(""), 0.0};
  CHECK_THROWS_AS(policy_update(policy, bad, 0.1), UpdateRejected);
  CHECK_THROWS_AS(policy_update(policy, g, 0.0), ContractViolation);
}

TEST_CASE("repeated updates on an easy-feature universe raise success_prob") {
  PromptUniverse universe = single_prompt_universe(0.5, {1.0});
  PolicyState policy{{0.0}, 0};
  const LengthModel lm;
  const Rng root(13);
  double prev = success_prob(policy, universe.prompts[0]);
  for (int t = 0; t < 60; ++t) {
    const std::vector<RolloutGroup> batch{
        sample_rollout_group(policy, universe.prompts[0], 16, lm, 4096,
                             root.sub(static_cast<std::uint64_t>(t)))};
    const GradientEstimate g = grpo_gradient_estimate(policy, universe, batch);
    policy = policy_update(policy, g, 0.5);
    const double p = success_prob(policy, universe.prompts[0]);
    if (g.g[0] > 0.0) CHECK(p > prev);
    prev = p;
  }
  CHECK(prev > 0.5);
}

TEST_CASE("effective ratio anchors") {
  std::vector<RolloutGroup> unanimous{make_group({1, 1}, 0), make_group({0, 0}, 0)};
  CHECK(effective_ratio(unanimous) == 0.0);
  std::vector<RolloutGroup> mixed{make_group({1, 0}, 0), make_group({0, 1}, 0)};
  CHECK(effective_ratio(mixed) == 1.0);
  std::vector<RolloutGroup> half{make_group({1, 1}, 0), make_group({0, 1}, 0)};
  CHECK(effective_ratio(half) == 0.5);
}

TEST_CASE("expected squared advantage: formula and argmax") {
  CHECK(expected_sq_advantage(0.5) == doctest::Approx(0.25));
  CHECK(expected_sq_advantage(0.0) == 0.0);
  CHECK(expected_sq_advantage(1.0) == 0.0);
  double best_p = -1.0;
  double best = -1.0;
  for (int i = 1; i <= 99; ++i) {
    const double p = i / 100.0;
    const double v = expected_sq_advantage(p);
    if (v > best) {
      best = v;
      best_p = p;
    }
  }
  CHECK(best_p == doctest::Approx(0.5));
}

TEST_CASE("gradient norm peaks at p = 0.5") {
  PolicyState policy{{0.0}, 0};
  PromptSpec mid;
  mid.features = {1.0};
  mid.difficulty = 0.0;  // p = 0.5
  const double peak = l2_norm(analytic_gradient(policy, mid));
  for (double p : {0.05, 0.2, 0.45, 0.55, 0.8, 0.95}) {
    PromptSpec other = mid;
    other.difficulty = -std::log(p / (1.0 - p));
    CHECK(l2_norm(analytic_gradient(policy, other)) < peak);
  }
}

TEST_CASE("adam option still increments the step and moves uphill") {
  PromptUniverse universe = single_prompt_universe(0.0, {1.0});
  PolicyState policy{{0.0}, 0};
  AdamState adam;
  GradientEstimate g;
  g.g = {0.5};
  policy = adam_update(policy, adam, g, 0.01);
  CHECK(policy.step == 1);
  CHECK(policy.theta[0] > 0.0);
}
