#include "vrail/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace vrail::harness {

std::vector<double> moving_average(std::span<const double> rewards, int window) {
  if (window < 1) throw std::invalid_argument("moving average window must be >= 1");
  if (rewards.empty()) throw std::invalid_argument("moving average of an empty series");
  std::vector<double> out(rewards.size());
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
    // Summed fresh per element so the result does not depend on a running total.
    double sum = 0.0;
    for (std::size_t k = lo; k <= i; ++k) sum += rewards[k];
    out[i] = sum / static_cast<double>(i - lo + 1);
  }
  return out;
}

std::optional<int> epochs_to_threshold(std::span<const double> moving_avg, double threshold) {
  for (std::size_t i = 0; i < moving_avg.size(); ++i) {
    if (moving_avg[i] >= threshold) return static_cast<int>(i);
  }
  return std::nullopt;
}

double trimmed_mean(std::span<const double> values, int trim) {
  if (trim < 0) throw std::invalid_argument("trim must be >= 0");
  const auto t = static_cast<std::size_t>(trim);
  if (values.size() <= 2 * t) {
    throw std::invalid_argument("trimmed mean needs more than " + std::to_string(2 * t) +
                                " values, got " + std::to_string(values.size()));
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (std::size_t i = t; i < sorted.size() - t; ++i) sum += sorted[i];
  return sum / static_cast<double>(sorted.size() - 2 * t);
}

Convergence detect_convergence(std::span<const double> rewards, const ConvergenceCriteria& criteria) {
  if (rewards.empty()) return {};
  const std::vector<double> ma = moving_average(rewards, criteria.window);
  const std::size_t sustain = std::min(ma.size(), static_cast<std::size_t>(std::max(criteria.sustain, 1)));
  const bool holds = std::all_of(ma.end() - static_cast<std::ptrdiff_t>(sustain), ma.end(),
                                 [&](double v) { return v >= criteria.threshold; });
  if (!holds) return {};
  return {true, epochs_to_threshold(ma, criteria.threshold)};
}

RunMetrics compute_metrics(std::uint64_t seed, std::span<const double> rewards,
                           const ConvergenceCriteria& criteria) {
  RunMetrics m;
  m.seed = seed;
  m.moving_avg = moving_average(rewards, criteria.window);
  const Convergence c = detect_convergence(rewards, criteria);
  m.converged = c.converged;
  m.convergence_epoch = c.epoch;
  for (std::size_t k = 0; k < kRewardThresholds.size(); ++k) {
    m.epochs_to_threshold[k] = epochs_to_threshold(m.moving_avg, kRewardThresholds[k]);
  }
  return m;
}

}  // namespace vrail::harness
