#pragma once

// Potential-based reward shaping with a learned value estimator as the potential.

#include <optional>
#include <span>

#include "vrail/value_estimator.hpp"

namespace vrail::shaping {

struct Shaper {
  /// Absent potential means the identity transform (plain DQN).
  std::optional<estimator::EstimatorParams> potential;
  double gamma = 0.99;

  bool is_identity() const { return !potential.has_value(); }
  /// Potential of a feature vector; 0 for the identity shaper.
  double potential_at(std::span<const double> x) const;
};

inline Shaper identity_shaper(double gamma = 0.99) { return Shaper{std::nullopt, gamma}; }

/// r + gamma * phi(s') * (1 - terminal) - phi(s). The successor of a terminal
/// transition has potential zero.
double shaped_reward(const Shaper& shaper, double reward, std::span<const double> x_s,
                     std::span<const double> x_next, bool terminal);

}  // namespace vrail::shaping
