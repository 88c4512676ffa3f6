#include "vrail/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "vrail/dense_net.hpp"
#include "vrail/shaping.hpp"
#include "vrail/taxi_env.hpp"
#include "vrail/taxi_oracle.hpp"
#include "vrail/value_estimator.hpp"

namespace vrail::selfcheck {

namespace {

using Clock = std::chrono::steady_clock;

CheckResult timed(std::string name, double budget_seconds, const std::function<std::string()>& body) {
  CheckResult result;
  result.name = std::move(name);
  const auto start = Clock::now();
  try {
    result.detail = body();
    result.passed = result.detail.empty();
  } catch (const std::exception& e) {
    result.detail = std::string("exception: ") + e.what();
  }
  result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (result.passed && budget_seconds > 0.0 && result.seconds >= budget_seconds) {
    result.passed = false;
    result.detail = "took " + std::to_string(result.seconds) + " s, budget " + std::to_string(budget_seconds) + " s";
  }
  if (result.passed) result.detail = "ok";
  return result;
}

double squared_loss(const nn::NetworkParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& t) {
  const Eigen::VectorXd y = nn::forward(p, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  return 0.5 * (y - t).squaredNorm();
}

estimator::FitOptions fit_options(int epochs) {
  estimator::FitOptions o;
  o.epochs = epochs;
  o.lr = 1e-2;
  return o;
}

}  // namespace

CheckResult environment_exactness() {
  return timed("environment exactness", 1.0, [] () -> std::string {
    for (int i = 0; i < taxi::kNumStates; ++i) {
      if (taxi::encode_state(taxi::decode_state(i)) != i) return "encode/decode mismatch at " + std::to_string(i);
    }
    for (bool sparse : {false, true}) {
      const oracle::TaxiRuleOracle rules(sparse);
      taxi::EnvConfig cfg;
      cfg.sparse_rewards = sparse;
      for (int i = 0; i < taxi::kNumStates; ++i) {
        for (int a = 0; a < taxi::kNumActions; ++a) {
          const auto got = taxi::step(taxi::decode_state(i), taxi::action_from_index(a), cfg);
          const auto want = rules.transition(i, a);
          if (taxi::encode_state(got.next_state) != want.next_index || got.reward != want.reward ||
              got.terminal != want.terminal) {
            return "transition (" + std::to_string(i) + ", " + std::to_string(a) + ") differs from the rule table" +
                   (sparse ? " (sparse)" : "");
          }
        }
      }
    }
    std::ostringstream a, b;
    taxi::dump_transitions(a, {});
    taxi::dump_transitions(b, {});
    if (a.str() != b.str()) return "dump-env output differs between runs";
    return {};
  });
}

CheckResult shaping_invariance(int potentials, std::uint64_t seed) {
  return timed("shaping invariance", 10.0, [=]() -> std::string {
    const taxi::ValueIterationResult plain = taxi::value_iteration({}, 0.99);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-25.0, 25.0);
    for (int trial = 0; trial < potentials; ++trial) {
      std::vector<double> phi(taxi::kNumStates);
      for (double& p : phi) p = u(rng);
      const taxi::ValueIterationResult shaped =
          taxi::value_iteration({}, 0.99, [&](int s) { return phi[static_cast<std::size_t>(s)]; });
      int checked = 0;
      for (int i = 0; i < taxi::kNumStates; ++i) {
        auto q = plain.q[static_cast<std::size_t>(i)];
        std::sort(q.begin(), q.end(), std::greater<>());
        if (q[0] - q[1] < 1e-6) continue;
        ++checked;
        if (shaped.policy[static_cast<std::size_t>(i)] != plain.policy[static_cast<std::size_t>(i)]) {
          return "potential " + std::to_string(trial) + " changes the greedy action at state " + std::to_string(i);
        }
      }
      if (checked == 0) return "no unique-argmax states";
    }
    return {};
  });
}

CheckResult gradient_correctness(int configurations, std::uint64_t seed) {
  return timed("gradient correctness", 10.0, [=]() -> std::string {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> width(1, 9);
    std::uniform_int_distribution<int> depth(0, 3);
    std::normal_distribution<double> n(0.0, 1.0);
    constexpr double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < configurations; ++trial) {
      nn::NetworkSpec spec{width(rng), {}, width(rng)};
      for (int d = depth(rng); d > 0; --d) spec.hidden_layers.push_back(width(rng));
      nn::NetworkParams p = nn::initialize(spec, rng);
      Eigen::VectorXd x(spec.input_dim), t(spec.output_dim);
      for (auto& v : x) v = n(rng);
      for (auto& v : t) v = n(rng);
      const Eigen::VectorXd dy =
          nn::forward(p, std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))) - t;
      const nn::NetworkParams analytic =
          nn::backward(p, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                       std::span<const double>(dy.data(), static_cast<std::size_t>(dy.size())));
      auto compare = [&](double& slot, double grad) {
        const double saved = slot;
        slot = saved + h;
        const double up = squared_loss(p, x, t);
        slot = saved - h;
        const double down = squared_loss(p, x, t);
        slot = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(numeric), std::abs(grad), 1e-6});
        worst = std::max(worst, std::abs(numeric - grad) / denom);
      };
      for (std::size_t l = 0; l < p.layers.size(); ++l) {
        for (Eigen::Index k = 0; k < p.layers[l].weights.size(); ++k) {
          compare(p.layers[l].weights.data()[k], analytic.layers[l].weights.data()[k]);
        }
        for (Eigen::Index k = 0; k < p.layers[l].bias.size(); ++k) {
          compare(p.layers[l].bias.data()[k], analytic.layers[l].bias.data()[k]);
        }
      }
    }
    if (!(worst < 1e-4)) return "max relative error " + std::to_string(worst);
    return {};
  });
}

CheckResult estimator_fit(std::uint64_t seed) {
  return timed("estimator fit", 0.0, [=]() -> std::string {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    auto truth = estimator::EstimatorParams::zeros(estimator::Kind::Linear, taxi::kBaseFeatureDim);
    for (double& v : truth.values) v = n(rng);
    estimator::ValueDataset data;
    for (int s = 0; s < taxi::kNumStates; ++s) {
      auto x = taxi::extract_features(taxi::decode_state(s), {});
      const double y = estimator::predict(truth, x);
      data.push_back({std::move(x), y});
    }
    const auto fitted = estimator::fit(data, estimator::Kind::Linear, fit_options(5000));
    const double err = estimator::mse(fitted.params, data);
    if (!(err < 1e-3)) return "linear fit MSE " + std::to_string(err) + " after 5000 steps";

    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (auto& sample : data) sample.target = u(rng);
    for (auto kind : {estimator::Kind::Linear, estimator::Kind::Quadratic}) {
      const auto r = estimator::fit(data, kind, fit_options(50));
      for (std::size_t k = 1; k < r.loss_history.size(); ++k) {
        if (r.loss_history[k] > r.loss_history[k - 1]) {
          return std::string(estimator::kind_name(kind)) + " fit loss rose at epoch " + std::to_string(k);
        }
      }
    }
    return {};
  });
}

CheckResult telescoping(int episodes, std::uint64_t seed) {
  return timed("telescoping", 0.0, [=]() -> std::string {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 3.0);
    std::uniform_int_distribution<int> any_action(0, taxi::kNumActions - 1);
    const taxi::ValueIterationResult vi = taxi::value_iteration({}, 0.99);
    auto params = estimator::EstimatorParams::zeros(estimator::Kind::Quadratic, taxi::kBaseFeatureDim);
    for (double& v : params.values) v = n(rng);
    const shaping::Shaper shaper{params, 1.0};
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int e = 0; e < episodes; ++e) {
      taxi::TaxiState s = taxi::reset(rng);
      const double phi0 = shaper.potential_at(taxi::extract_features(s, {}));
      double raw = 0.0, shaped = 0.0;
      bool done = false;
      for (int t = 0; t < 1000 && !done; ++t) {
        const int a = coin(rng) < 0.2 ? any_action(rng) : vi.policy[static_cast<std::size_t>(taxi::encode_state(s))];
        const auto out = taxi::step(s, taxi::action_from_index(a), {});
        raw += out.reward;
        shaped += shaping::shaped_reward(shaper, out.reward, taxi::extract_features(s, {}),
                                         taxi::extract_features(out.next_state, {}), out.terminal);
        s = out.next_state;
        done = out.terminal;
      }
      if (!done) return "episode " + std::to_string(e) + " did not terminate";
      if (std::abs(shaped - (raw - phi0)) > 1e-9) {
        return "episode " + std::to_string(e) + ": shaped " + std::to_string(shaped) + " vs " +
               std::to_string(raw - phi0);
      }
    }
    return {};
  });
}

std::vector<CheckResult> run_all() {
  return {environment_exactness(), shaping_invariance(), gradient_correctness(), estimator_fit(), telescoping()};
}

}  // namespace vrail::selfcheck
