#pragma once
// Deterministic correctness checks runnable outside the unit tests: the
// environment against an independent rule table, shaping invariance under value
// iteration, network gradients, estimator fitting and reward telescoping.

#include <cstdint>
#include <string>
#include <vector>

namespace vrail::selfcheck {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Bijection, all 3,000 transitions (dense and sparse) against the oracle, stable dump. Budget 1 s.
CheckResult environment_exactness();
/// Greedy policies agree at unique-argmax states for `potentials` random potentials. Budget 10 s.
CheckResult shaping_invariance(int potentials = 5, std::uint64_t seed = 99);
/// Backprop against central differences (h = 1e-5) on random networks. Budget 10 s.
CheckResult gradient_correctness(int configurations = 20, std::uint64_t seed = 1234);
/// Realizable linear targets reach MSE < 1e-3 in 5,000 steps; 50-epoch fits are monotone.
CheckResult estimator_fit(std::uint64_t seed = 17);
/// Shaped return equals unshaped return minus phi(s0) at gamma = 1.
CheckResult telescoping(int episodes = 100, std::uint64_t seed = 77);

std::vector<CheckResult> run_all();

}  // namespace vrail::selfcheck
