#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "vrail/dqn_agent.hpp"

using namespace vrail;
using namespace vrail::dqn;

namespace {

AgentConfig small_config() {
  AgentConfig cfg;
  cfg.hidden_layers = {16};
  cfg.batch_size = 8;
  cfg.buffer_capacity = 1000;
  return cfg;
}

BehaviorOverride optimal_policy() {
  static const taxi::ValueIterationResult vi = taxi::value_iteration({}, 0.99);
  return [](const taxi::TaxiState& s) {
    return taxi::action_from_index(vi.policy[static_cast<std::size_t>(taxi::encode_state(s))]);
  };
}

}  // namespace

TEST(Epsilon, ScheduleValues) {
  EXPECT_EQ(epsilon(0), 1.0);
  EXPECT_DOUBLE_EQ(epsilon(1), 0.995);
  EXPECT_EQ(epsilon(10000), 0.01);
  EXPECT_THROW(epsilon(-1), std::invalid_argument);
}

TEST(Epsilon, NonIncreasingAndBounded) {
  double prev = epsilon(0);
  for (long t = 1; t < 3000; ++t) {
    const double e = epsilon(t);
    ASSERT_LE(e, prev);
    ASSERT_GE(e, 0.01);
    ASSERT_LE(e, 1.0);
    prev = e;
  }
}

TEST(SelectAction, GreedyPicksArgmax) {
  std::mt19937_64 rng(0);
  const std::array<double, 6> q{0, 5, 1, 1, 1, 1};
  EXPECT_EQ(select_action(q, 0.0, rng), taxi::Action::North);
}

TEST(SelectAction, TiesBreakToLowestIndex) {
  std::mt19937_64 rng(0);
  const std::array<double, 6> q{2, 2, 0, 0, 0, 0};
  EXPECT_EQ(select_action(q, 0.0, rng), taxi::Action::South);
}

TEST(SelectAction, FullExplorationIsUniform) {
  std::mt19937_64 rng(31);
  const std::array<double, 6> q{0, 9, 0, 0, 0, 0};
  std::array<int, 6> counts{};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(taxi::to_index(select_action(q, 1.0, rng)))];
  const double p = 1.0 / 6.0;
  const double sigma = std::sqrt(draws * p * (1.0 - p));
  for (int c : counts) EXPECT_NEAR(c, draws * p, 3.0 * sigma);
}

TEST(SelectAction, RejectsEpsilonOutsideUnitInterval) {
  std::mt19937_64 rng(0);
  const std::array<double, 6> q{};
  EXPECT_THROW(select_action(q, 1.5, rng), std::invalid_argument);
}

TEST(ReplayBuffer, EvictsOldestFirst) {
  ReplayBuffer buffer(5);
  for (int i = 0; i < 12; ++i) {
    ReplayTransition t;
    t.state_index = i;  // sentinel
    buffer.push(t);
    ASSERT_LE(buffer.size(), buffer.capacity());
  }
  ASSERT_EQ(buffer.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(buffer[i].state_index, static_cast<int>(7 + i));
  EXPECT_THROW(buffer[5], std::out_of_range);
}

TEST(ReplayBuffer, SamplesOnlyStoredTransitions) {
  ReplayBuffer buffer(4);
  std::mt19937_64 rng(1);
  EXPECT_THROW(buffer.sample(rng), std::out_of_range);
  for (int i = 0; i < 6; ++i) {
    ReplayTransition t;
    t.state_index = i;
    buffer.push(t);
  }
  for (int k = 0; k < 200; ++k) EXPECT_GE(buffer.sample(rng).state_index, 2);
}

TEST(TdTarget, TerminalReducesToReward) {
  EXPECT_EQ(td_target(17.0, 0.99, 123.0, true), 17.0);
  EXPECT_DOUBLE_EQ(td_target(-1.0, 0.99, 10.0, false), -1.0 + 9.9);
}

TEST(GreedyValueTable, ZeroFinalLayerGivesZeros) {
  Agent agent(small_config(), {}, 3);
  auto& last = agent.mutable_online().layers.back();
  last.weights.setZero();
  last.bias.setZero();
  for (double v : greedy_value_table(agent.online(), {})) EXPECT_EQ(v, 0.0);
}

TEST(GreedyValueTable, EntriesAreMaxOfForwardOutput) {
  Agent agent(small_config(), {}, 4);
  const auto values = greedy_value_table(agent.online(), {});
  for (int s = 0; s < taxi::kNumStates; s += 37) {
    const auto q = nn::forward(agent.online(), taxi::extract_features(taxi::decode_state(s), {}));
    EXPECT_DOUBLE_EQ(values[static_cast<std::size_t>(s)], q.maxCoeff());
  }
}

TEST(TrainEpoch, WarmUpSkipsGradientSteps) {
  AgentConfig cfg = small_config();
  cfg.batch_size = 64;
  Agent agent(cfg, {}, 5);
  const nn::NetworkParams before = agent.online();
  const EpisodeStats stats = agent.train_epoch(shaping::identity_shaper(), 0, optimal_policy());
  ASSERT_LT(stats.steps, 64);
  EXPECT_EQ(stats.gradient_steps, 0);
  EXPECT_EQ(agent.buffer().size(), static_cast<std::size_t>(stats.steps));
  EXPECT_EQ(agent.online(), before);
}

TEST(TrainEpoch, OptimalPolicyRewardMatchesEpisodeLength) {
  Agent agent(small_config(), {}, 6);
  for (int e = 0; e < 20; ++e) {
    const EpisodeStats stats = agent.train_epoch(shaping::identity_shaper(), e, optimal_policy());
    ASSERT_TRUE(stats.terminal);
    EXPECT_EQ(stats.reward, 20.0 - (stats.steps - 1));
    EXPECT_EQ(stats.shaped_reward, stats.reward);
  }
  EXPECT_GT(agent.gradient_steps(), 0);
}

TEST(TrainEpoch, ReportedRewardIsUnshaped) {
  AgentConfig cfg = small_config();
  cfg.gamma = 1.0;
  Agent agent(cfg, {}, 7);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 2.0);
  auto p = estimator::EstimatorParams::zeros(estimator::Kind::Linear, 19);
  for (double& v : p.values) v = n(rng);
  const shaping::Shaper shaper{p, 1.0};
  for (int e = 0; e < 10; ++e) {
    const EpisodeStats stats = agent.train_epoch(shaper, e, optimal_policy());
    ASSERT_TRUE(stats.terminal);
    const double phi0 =
        shaper.potential_at(taxi::extract_features(taxi::decode_state(stats.start_state), {}));
    EXPECT_NEAR(stats.reward - stats.shaped_reward, phi0, 1e-9);
  }
}

TEST(TrainEpoch, TargetNetworkSyncsOnSchedule) {
  AgentConfig cfg = small_config();
  cfg.target_update_every = 3;
  Agent agent(cfg, {}, 9);
  for (int e = 0; e < 3; ++e) {
    agent.train_epoch(shaping::identity_shaper(), e, optimal_policy());
    if (e < 2 && agent.gradient_steps() > 0) EXPECT_FALSE(agent.target() == agent.online());
  }
  EXPECT_EQ(agent.target(), agent.online());
}

TEST(TrainEpoch, ReshapeAtSampleOnlyMattersWhenPotentialChanges) {
  auto make_shaper = [](double scale) {
    auto p = estimator::EstimatorParams::zeros(estimator::Kind::Linear, 19);
    for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = scale * static_cast<double>(i % 5);
    return shaping::Shaper{p, 0.99};
  };
  AgentConfig stale = small_config();
  stale.reshape_at_sample = false;
  AgentConfig fresh = small_config();
  fresh.reshape_at_sample = true;
  Agent a(stale, {}, 12), b(fresh, {}, 12);
  const shaping::Shaper first = make_shaper(1.0);
  for (int e = 0; e < 4; ++e) {
    ASSERT_EQ(a.train_epoch(first, e).reward, b.train_epoch(first, e).reward);
  }
  ASSERT_GT(a.gradient_steps(), 0);
  EXPECT_EQ(a.online(), b.online());
  const shaping::Shaper second = make_shaper(-2.0);
  a.train_epoch(second, 4);
  b.train_epoch(second, 4);
  EXPECT_FALSE(a.online() == b.online());
}

TEST(TrainEpoch, DeterministicForSeed) {
  auto run = [] {
    Agent agent(small_config(), {}, 10);
    std::vector<double> rewards;
    for (int e = 0; e < 15; ++e) rewards.push_back(agent.train_epoch(shaping::identity_shaper(), e).reward);
    return std::make_pair(rewards, agent.online());
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(TrainEpoch, EpisodeCapTruncates) {
  taxi::EnvConfig env;
  env.max_episode_steps = 5;
  Agent agent(small_config(), env, 11);
  // Always North: never terminates.
  const EpisodeStats stats =
      agent.train_epoch(shaping::identity_shaper(), 0, [](const taxi::TaxiState&) { return taxi::Action::North; });
  EXPECT_EQ(stats.steps, 5);
  EXPECT_FALSE(stats.terminal);
  for (std::size_t i = 0; i < agent.buffer().size(); ++i) EXPECT_FALSE(agent.buffer()[i].terminal);
}

TEST(Agent, RejectsInvalidConfig) {
  AgentConfig cfg;
  cfg.epsilon_floor = 0.0;
  EXPECT_THROW(Agent(cfg, {}, 0), std::invalid_argument);
  cfg = AgentConfig{};
  cfg.gamma = 1.5;
  EXPECT_THROW(Agent(cfg, {}, 0), std::invalid_argument);
}
