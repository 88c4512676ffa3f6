#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "vrail/metrics.hpp"
#include "vrail/taxi_env.hpp"

using namespace vrail::harness;

TEST(MovingAverage, ExpandingWarmUp) {
  const std::vector<double> r{1, 2, 3, 4};
  EXPECT_EQ(moving_average(r, 2), (std::vector<double>{1.0, 1.5, 2.5, 3.5}));
  EXPECT_EQ(moving_average(r, 100), (std::vector<double>{1.0, 1.5, 2.0, 2.5}));
}

TEST(MovingAverage, RejectsEmptySeriesAndBadWindow) {
  EXPECT_THROW(moving_average(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(moving_average(std::vector<double>{1.0}, 0), std::invalid_argument);
}

TEST(MovingAverage, BoundedByWindowExtremes) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-200.0, 20.0);
  std::vector<double> r(700);
  for (double& v : r) v = u(rng);
  const auto ma = moving_average(r);
  ASSERT_EQ(ma.size(), r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const std::size_t lo = i >= 99 ? i - 99 : 0;
    const auto [mn, mx] = std::minmax_element(r.begin() + static_cast<long>(lo), r.begin() + static_cast<long>(i) + 1);
    ASSERT_GE(ma[i], *mn - 1e-9);
    ASSERT_LE(ma[i], *mx + 1e-9);
  }
}

TEST(MovingAverage, ConstantSeriesIsConstant) {
  const std::vector<double> r(300, -3.0);
  for (double v : moving_average(r)) EXPECT_EQ(v, -3.0);
}

TEST(EpochsToThreshold, FirstCrossing) {
  const std::vector<double> ma{-20, -12, -9, -11, 1};
  EXPECT_EQ(epochs_to_threshold(ma, -10.0), 2);
  EXPECT_EQ(epochs_to_threshold(ma, 0.0), 4);
  EXPECT_EQ(epochs_to_threshold(ma, 5.0), std::nullopt);
  EXPECT_EQ(epochs_to_threshold(ma, -20.0), 0);
}

TEST(EpochsToThreshold, MonotoneInThreshold) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> r(2000);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = -50.0 + 0.03 * static_cast<double>(i) + n(rng) * 10.0;
  const auto ma = moving_average(r);
  std::optional<int> prev = 0;
  for (double t : kRewardThresholds) {
    const auto e = epochs_to_threshold(ma, t);
    if (!prev) {
      EXPECT_FALSE(e.has_value());
    } else if (e) {
      EXPECT_GE(*e, *prev);
    }
    prev = e;
  }
}

TEST(TrimmedMean, Examples) {
  EXPECT_EQ(trimmed_mean(std::vector<double>{1, 2, 3, 4, 5, 6, 100}), 4.0);
  EXPECT_EQ(trimmed_mean(std::vector<double>{5, 5, 5, 5, 5}), 5.0);
  EXPECT_EQ(trimmed_mean(std::vector<double>{7, 1, 3}, 0), 11.0 / 3.0);
  EXPECT_THROW(trimmed_mean(std::vector<double>{1, 2, 3, 4}), std::invalid_argument);
  EXPECT_THROW(trimmed_mean(std::vector<double>{1, 2, 3}, -1), std::invalid_argument);
}

TEST(TrimmedMean, OrderInvariantAndWithinRange) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 2000.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(10);
    for (double& x : v) x = u(rng);
    const double m = trimmed_mean(v);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_DOUBLE_EQ(trimmed_mean(v), m);
    std::sort(v.begin(), v.end());
    EXPECT_GE(m, v[2]);
    EXPECT_LE(m, v[7]);
  }
}

TEST(Convergence, SustainedTailConverges) {
  std::vector<double> r(600, -100.0);
  for (std::size_t i = 300; i < r.size(); ++i) r[i] = 8.0;
  const Convergence c = detect_convergence(r);
  ASSERT_TRUE(c.converged);
  // The window mean first reaches 6 once 97 of the last 100 rewards are 8.
  const auto ma = moving_average(r);
  EXPECT_EQ(c.epoch, epochs_to_threshold(ma, 6.0));
  EXPECT_GE(*c.epoch, 300);
}

TEST(Convergence, LateDipFails) {
  std::vector<double> r(600, 8.0);
  for (std::size_t i = 550; i < 560; ++i) r[i] = -200.0;
  EXPECT_FALSE(detect_convergence(r).converged);
  EXPECT_FALSE(detect_convergence(std::vector<double>{}).converged);
}

TEST(Convergence, EarlyHighThenCollapseFails) {
  std::vector<double> r(2000, 8.0);
  for (std::size_t i = 1500; i < r.size(); ++i) r[i] = -30.0;
  EXPECT_FALSE(detect_convergence(r).converged);
  EXPECT_EQ(epochs_to_threshold(moving_average(r), 5.0), 0);
}

TEST(Convergence, OptimalPolicySeriesConverges) {
  // Rewards of the optimal policy from uniformly drawn start states.
  const auto vi = vrail::taxi::value_iteration({}, 0.99);
  std::mt19937_64 rng(5);
  std::vector<double> r;
  for (int e = 0; e < 2000; ++e) {
    vrail::taxi::TaxiState s = vrail::taxi::reset(rng);
    double total = 0.0;
    for (int t = 0; t < 200; ++t) {
      const auto out = vrail::taxi::step(
          s, vrail::taxi::action_from_index(vi.policy[static_cast<std::size_t>(vrail::taxi::encode_state(s))]), {});
      total += out.reward;
      s = out.next_state;
      if (out.terminal) break;
    }
    r.push_back(total);
  }
  EXPECT_TRUE(detect_convergence(r).converged);
}

TEST(ComputeMetrics, FillsThresholds) {
  std::vector<double> r(400);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = -20.0 + 0.1 * static_cast<double>(i);
  const RunMetrics m = compute_metrics(9, r);
  EXPECT_EQ(m.seed, 9u);
  ASSERT_EQ(m.moving_avg.size(), r.size());
  for (std::size_t k = 0; k < kRewardThresholds.size(); ++k) {
    EXPECT_EQ(m.epochs_to_threshold[k], epochs_to_threshold(m.moving_avg, kRewardThresholds[k]));
  }
  EXPECT_TRUE(m.epochs_to_threshold[0].has_value());
}
