#include <gtest/gtest.h>

#include "vrail/bilevel_loop.hpp"

using namespace vrail;
using namespace vrail::bilevel;

namespace {

dqn::AgentConfig tiny_agent() {
  dqn::AgentConfig cfg;
  cfg.hidden_layers = {16};
  cfg.batch_size = 8;
  cfg.buffer_capacity = 2000;
  return cfg;
}

taxi::EnvConfig short_env() {
  taxi::EnvConfig env;
  env.max_episode_steps = 40;
  return env;
}

LoopConfig short_loop(EstimatorChoice estimator) {
  LoopConfig loop;
  loop.outer_cycles = 3;
  loop.rl_epochs_per_cycle = 8;
  loop.estimator = estimator;
  return loop;
}

}  // namespace

TEST(EstimatorChoice, NamesRoundTrip) {
  for (auto c : {EstimatorChoice::None, EstimatorChoice::Linear, EstimatorChoice::Quadratic}) {
    EXPECT_EQ(estimator_choice_from_name(estimator_choice_name(c)), c);
  }
  EXPECT_EQ(estimator_choice_from_name("dqn"), EstimatorChoice::None);
  EXPECT_THROW(estimator_choice_from_name("cubic"), std::invalid_argument);
}

TEST(LoopConfig, Validation) {
  LoopConfig loop;
  EXPECT_EQ(loop.total_epochs(), 2000);
  loop.outer_cycles = 0;
  EXPECT_THROW(loop.validate(), std::invalid_argument);
  loop = LoopConfig{};
  loop.dl_lr = 0.0;
  EXPECT_THROW(loop.validate(), std::invalid_argument);
}

TEST(BuildValueDataset, CoversStatesWithGreedyValues) {
  const nn::NetworkParams net = nn::initialize({19, {8}, 6}, 1);
  const auto data = build_value_dataset(net, {});
  ASSERT_EQ(data.size(), 500u);
  const auto values = dqn::greedy_value_table(net, {});
  for (int s = 0; s < 500; s += 61) EXPECT_EQ(data[static_cast<std::size_t>(s)].target, values[static_cast<std::size_t>(s)]);
  std::vector<bool> visited(500, false);
  visited[4] = visited[99] = true;
  const auto subset = build_value_dataset(net, {}, &visited);
  ASSERT_EQ(subset.size(), 2u);
  EXPECT_EQ(subset[1].target, values[99]);
}

TEST(Run, NoneEstimatorEqualsFixedIdentityShaper) {
  const RunRecord a = run(short_loop(EstimatorChoice::None), tiny_agent(), short_env(), 21);
  const RunRecord b = run_fixed_shaper(shaping::identity_shaper(), tiny_agent(), short_env(), 21, 24);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.model, "dqn");
  EXPECT_TRUE(a.snapshots.empty());
}

TEST(Run, FirstCycleMatchesPlainDqn) {
  const RunRecord dqn_run = run(short_loop(EstimatorChoice::None), tiny_agent(), short_env(), 5);
  for (auto est : {EstimatorChoice::Linear, EstimatorChoice::Quadratic}) {
    const RunRecord vrail_run = run(short_loop(est), tiny_agent(), short_env(), 5);
    ASSERT_EQ(vrail_run.rewards.size(), 24u);
    for (int e = 0; e < 8; ++e) EXPECT_EQ(vrail_run.rewards[e], dqn_run.rewards[e]) << "epoch " << e;
  }
}

TEST(Run, OneSnapshotPerCycle) {
  const RunRecord r = run(short_loop(EstimatorChoice::Quadratic), tiny_agent(), short_env(), 2);
  ASSERT_FALSE(r.error) << *r.error;
  EXPECT_EQ(r.model, "quadratic");
  ASSERT_EQ(r.snapshots.size(), 3u);
  for (const auto& s : r.snapshots) {
    EXPECT_EQ(s.kind, estimator::Kind::Quadratic);
    EXPECT_EQ(s.dim, 19u);
    EXPECT_TRUE(s.all_finite());
  }
  EXPECT_EQ(r.epsilons.size(), r.rewards.size());
  EXPECT_EQ(r.epsilons.front(), 1.0);
}

TEST(Run, WallFeaturesWidenEstimator) {
  taxi::EnvConfig env = short_env();
  env.wall_features = true;
  const RunRecord r = run(short_loop(EstimatorChoice::Linear), tiny_agent(), env, 2);
  ASSERT_FALSE(r.snapshots.empty());
  EXPECT_EQ(r.snapshots.back().dim, 23u);
}

TEST(Run, DeterministicForSeed) {
  const LoopConfig loop = short_loop(EstimatorChoice::Linear);
  EXPECT_EQ(run(loop, tiny_agent(), short_env(), 8), run(loop, tiny_agent(), short_env(), 8));
  EXPECT_NE(run(loop, tiny_agent(), short_env(), 8).rewards, run(loop, tiny_agent(), short_env(), 9).rewards);
}

TEST(Run, DivergentFitIsRecorded) {
  LoopConfig loop = short_loop(EstimatorChoice::Linear);
  loop.dl_lr = 50.0;
  const RunRecord r = run(loop, tiny_agent(), short_env(), 3);
  ASSERT_TRUE(r.error.has_value());
  EXPECT_NE(r.error->find("lr 50"), std::string::npos);
  EXPECT_EQ(r.rewards.size(), 8u);
  EXPECT_FALSE(r.converged);
}

TEST(Run, CallbackSeesEveryEpoch) {
  int calls = 0;
  int last = -1;
  run(short_loop(EstimatorChoice::Linear), tiny_agent(), short_env(), 1, [&](int epoch, const dqn::EpisodeStats&) {
    EXPECT_EQ(epoch, last + 1);
    last = epoch;
    ++calls;
  });
  EXPECT_EQ(calls, 24);
}

TEST(TransferRun, ZeroPotentialMatchesBaseline) {
  const auto zero = estimator::EstimatorParams::zeros(estimator::Kind::Quadratic, 19);
  const RunRecord t = transfer_run(zero, tiny_agent(), short_env(), 4, 20);
  const RunRecord b = run_fixed_shaper(shaping::identity_shaper(), tiny_agent(), short_env(), 4, 20);
  EXPECT_EQ(t.model, "dqn+frozen");
  EXPECT_EQ(t.rewards, b.rewards);
  EXPECT_EQ(t.epsilons, b.epsilons);
}

TEST(TransferRun, RejectsDimensionMismatch) {
  const auto wide = estimator::EstimatorParams::zeros(estimator::Kind::Linear, 23);
  EXPECT_THROW(transfer_run(wide, tiny_agent(), short_env(), 0, 5), estimator::DimensionMismatch);
}

TEST(RunRecordJson, RoundTripIsExact) {
  RunRecord r = run(short_loop(EstimatorChoice::Linear), tiny_agent(), short_env(), 6);
  r.error = "something";
  r.convergence_epoch = 12;
  EXPECT_EQ(run_record_from_json(nlohmann::json::parse(to_json(r).dump())), r);
  r.error.reset();
  r.convergence_epoch.reset();
  EXPECT_EQ(run_record_from_json(to_json(r)), r);
}

TEST(FinalizeConvergence, UsesCriteria) {
  RunRecord r;
  r.rewards.assign(300, 7.0);
  finalize_convergence(r);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.convergence_epoch, 0);
  harness::ConvergenceCriteria strict;
  strict.threshold = 7.5;
  finalize_convergence(r, strict);
  EXPECT_FALSE(r.converged);
  EXPECT_FALSE(r.convergence_epoch);
}
