#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "pcrl/metrics.hpp"
#include "pcrl/objective.hpp"
#include "pcrl/strategies.hpp"
#include "pcrl/synth_env.hpp"

using namespace pcrl;

namespace {

struct Fixture {
  PromptUniverse universe;
  SimContext ctx;
  PolicyState policy;

  Fixture() : universe(make_universe(config(), 1)),
              ctx{&universe, CostModel{}, Rng(1)},
              policy(make_policy(universe.feature_dim)) {}

  static UniverseConfig config() {
    UniverseConfig cfg;
    cfg.num_prompts = 300;
    cfg.feature_dim = 4;
    return cfg;
  }
};

}  // namespace

TEST_CASE("csv header is the fixed schema") {
  CHECK(std::string(metrics_csv_header()) ==
        "step,cumulative_sim_time_s,train_reward_pre_filter,train_reward_post_filter,"
        "effective_ratio,grad_norm,value_ev,empirical_ev_by_j,wasted_rollouts,"
        "mean_staleness,pi_ref_difficulty_of_selected");
}

TEST_CASE("csv rows serialize with 9 significant digits and empty optionals") {
  MetricsRecord r;
  r.step = 3;
  r.cumulative_sim_time_s = 12.3456789012345;
  r.train_reward_pre_filter = 1.0 / 3.0;
  r.train_reward_post_filter = 0.5;
  r.effective_ratio = 1.0;
  r.grad_norm = 0.25;
  r.wasted_rollouts = 7;
  r.mean_staleness = 0.0;
  r.pi_ref_difficulty_of_selected = std::numeric_limits<double>::quiet_NaN();
  const std::string row = metrics_csv_row(r);
  CHECK(row == "3,12.3456789,0.333333333,0.5,1,0.25,,,7,0,");

  r.value_ev = 0.125;
  r.empirical_ev_by_j = {{1, -1.25}, {4, 0.5}};
  const std::string row2 = metrics_csv_row(r);
  CHECK(row2 == "3,12.3456789,0.333333333,0.5,1,0.25,0.125,1:-1.25;4:0.5,7,0,");
}

TEST_CASE("pi_ref difficulty over the whole universe equals the universe mean") {
  Fixture fx;
  std::vector<std::int64_t> all_ids;
  double expected = 0.0;
  for (const PromptSpec& prompt : fx.universe.prompts) {
    all_ids.push_back(prompt.id);
    expected += success_prob(fx.policy, prompt);
  }
  expected /= static_cast<double>(fx.universe.prompts.size());
  CHECK(pi_ref_difficulty_analytic(fx.universe, all_ids, fx.policy) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sampled pi_ref difficulty approaches the analytic value") {
  Fixture fx;
  std::vector<std::int64_t> ids;
  for (std::int64_t i = 0; i < 200; ++i) ids.push_back(i);
  const double analytic = pi_ref_difficulty_analytic(fx.universe, ids, fx.policy);
  const double sampled =
      pi_ref_difficulty_sampled(fx.universe, ids, fx.policy, 256, Rng(7));
  CHECK(std::abs(sampled - analytic) < 0.02);
}

TEST_CASE("record_step snapshots match recomputation from the stored batch") {
  Fixture fx;
  StrategyConfig cfg;
  cfg.kind = StrategyConfig::Kind::kDS;
  cfg.m = 8;
  cfg.n = 8;
  cfg.k = 2;
  const SelectionResult sel = select_ds(fx.ctx, fx.policy, cfg);
  const GradientEstimate gradient = grpo_gradient_estimate(fx.policy, fx.universe, sel.batch);

  StepState state;
  state.step = 0;
  state.cumulative_sim_time_s = sel.sim_time_s;
  state.universe = &fx.universe;
  state.selection = &sel;
  state.gradient = &gradient;
  state.sampling_policy = &fx.policy;
  state.pi_ref = &fx.policy;
  const MetricsRecord record = record_step(state);

  CHECK(record.effective_ratio == effective_ratio(sel.batch));
  CHECK(record.effective_ratio == 1.0);  // DS construction
  CHECK(record.train_reward_post_filter > 0.0);
  CHECK(record.train_reward_post_filter < 1.0);
  CHECK(record.grad_norm == doctest::Approx(l2_norm(gradient.g)));
  CHECK(record.wasted_rollouts == sel.wasted_rollouts);
  double post = 0.0;
  for (const RolloutGroup& group : sel.batch) post += group.mean_reward;
  CHECK(record.train_reward_post_filter ==
        doctest::Approx(post / static_cast<double>(sel.batch.size())));
}

TEST_CASE("record_step on a no-batch selection leaves training fields empty") {
  Fixture fx;
  SelectionResult sel;  // nothing emitted
  sel.generated_rollouts_total = 64;
  sel.wasted_rollouts = 10;
  StepState state;
  state.step = 4;
  state.cumulative_sim_time_s = 2.0;
  state.universe = &fx.universe;
  state.selection = &sel;
  state.sampling_policy = &fx.policy;
  state.pi_ref = &fx.policy;
  const MetricsRecord record = record_step(state);
  CHECK(std::isnan(record.train_reward_post_filter));
  CHECK(std::isnan(record.pi_ref_difficulty_of_selected));
  CHECK(record.effective_ratio == 0.0);
  CHECK(record.grad_norm == 0.0);
  CHECK(record.wasted_rollouts == 10);
  const std::string row = metrics_csv_row(record);
  CHECK(row == "4,2,,,0,0,,,10,0,");
}
