#include "vrail/shaping.hpp"

namespace vrail::shaping {

double Shaper::potential_at(std::span<const double> x) const {
  return potential ? estimator::predict(*potential, x) : 0.0;
}

double shaped_reward(const Shaper& shaper, double reward, std::span<const double> x_s,
                     std::span<const double> x_next, bool terminal) {
  if (shaper.is_identity()) return reward;
  const double phi_next = terminal ? 0.0 : estimator::predict(*shaper.potential, x_next);
  const double phi = estimator::predict(*shaper.potential, x_s);
  return reward + shaper.gamma * phi_next - phi;
}

}  // namespace vrail::shaping
