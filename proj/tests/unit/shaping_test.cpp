#include <gtest/gtest.h>

#include <random>

#include "vrail/shaping.hpp"
#include "vrail/taxi_env.hpp"

using namespace vrail;
using shaping::Shaper;

namespace {

// Linear potential whose value on a one-hot feature vector equals the sum of the
// selected weights.
estimator::EstimatorParams potential_with(double row0, double ptaxi) {
  auto p = estimator::EstimatorParams::zeros(estimator::Kind::Linear, 19);
  p.values[0] = row0;
  p.values[taxi::kPassengerInTaxiFeature] = ptaxi;
  return p;
}

}  // namespace

TEST(ShapedReward, IdentityShaperReturnsReward) {
  const Shaper identity = shaping::identity_shaper();
  const auto x = taxi::extract_features(taxi::decode_state(3), {});
  EXPECT_EQ(shaping::shaped_reward(identity, -1.0, x, x, false), -1.0);
  EXPECT_EQ(identity.potential_at(x), 0.0);
}

TEST(ShapedReward, ArithmeticExample) {
  // phi(s) = 1 (row 0 only), phi(s') = 2 (row 0 and passenger in taxi).
  const Shaper shaper{potential_with(1.0, 1.0), 0.99};
  const auto xs = taxi::extract_features({0, 0, 0, 1}, {});
  const auto xn = taxi::extract_features({0, 0, taxi::kInTaxi, 1}, {});
  ASSERT_EQ(shaper.potential_at(xs), 1.0);
  ASSERT_EQ(shaper.potential_at(xn), 2.0);
  EXPECT_NEAR(shaping::shaped_reward(shaper, -1.0, xs, xn, false), -0.02, 1e-15);
}

TEST(ShapedReward, TerminalSuccessorHasZeroPotential) {
  const Shaper shaper{potential_with(3.0, 0.0), 0.99};
  const auto xs = taxi::extract_features({0, 4, taxi::kInTaxi, 1}, {});
  const auto xn = taxi::extract_features({0, 4, 1, 1}, {});
  EXPECT_EQ(shaping::shaped_reward(shaper, 20.0, xs, xn, true), 17.0);
}

TEST(ShapedReward, DimensionMismatchThrows) {
  const Shaper shaper{potential_with(1.0, 1.0), 0.99};
  EXPECT_THROW(shaping::shaped_reward(shaper, 0.0, std::vector<double>(23), std::vector<double>(23), false),
               estimator::DimensionMismatch);
}

TEST(ShapedReward, ZeroPotentialIsBitIdentical) {
  const Shaper zero{estimator::EstimatorParams::zeros(estimator::Kind::Quadratic, 19), 0.99};
  const auto x = taxi::extract_features(taxi::decode_state(42), {});
  for (double r : {-1.0, -10.0, 20.0, 0.0}) {
    EXPECT_EQ(shaping::shaped_reward(zero, r, x, x, false), r);
    EXPECT_EQ(shaping::shaped_reward(zero, r, x, x, true), r);
  }
}

TEST(ShapedReward, TelescopesOverTerminatingEpisodes) {
  // gamma = 1: sum of shaped rewards = sum of rewards - phi(s0) when the episode terminates.
  const taxi::ValueIterationResult vi = taxi::value_iteration({}, 0.99);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(0.0, 3.0);
  for (auto kind : {estimator::Kind::Linear, estimator::Kind::Quadratic}) {
    auto p = estimator::EstimatorParams::zeros(kind, 19);
    for (double& v : p.values) v = n(rng);
    const Shaper shaper{p, 1.0};
    for (int episode = 0; episode < 50; ++episode) {
      taxi::TaxiState s = taxi::reset(rng);
      const double phi0 = shaper.potential_at(taxi::extract_features(s, {}));
      double raw = 0.0, shaped = 0.0;
      bool done = false;
      for (int t = 0; t < 200 && !done; ++t) {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        const int a = coin(rng) < 0.2 ? std::uniform_int_distribution<int>(0, 5)(rng)
                                      : vi.policy[static_cast<std::size_t>(taxi::encode_state(s))];
        const auto out = taxi::step(s, taxi::action_from_index(a), {});
        raw += out.reward;
        shaped += shaping::shaped_reward(shaper, out.reward, taxi::extract_features(s, {}),
                                         taxi::extract_features(out.next_state, {}), out.terminal);
        s = out.next_state;
        done = out.terminal;
      }
      ASSERT_TRUE(done);
      EXPECT_NEAR(shaped, raw - phi0, 1e-9);
    }
  }
}
