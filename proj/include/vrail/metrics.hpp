#pragma once

// Learning-curve statistics: moving averages, threshold crossings, convergence
// detection and trimmed means.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vrail::harness {

inline constexpr int kMovingAverageWindow = 100;
inline constexpr std::array<double, 4> kRewardThresholds = {-10.0, -5.0, 0.0, 5.0};

/// Element i is the mean of rewards[max(0, i - window + 1) .. i].
std::vector<double> moving_average(std::span<const double> rewards, int window = kMovingAverageWindow);

/// First index whose moving average is >= threshold.
std::optional<int> epochs_to_threshold(std::span<const double> moving_avg, double threshold);

/// Mean after dropping the `trim` largest and `trim` smallest values.
double trimmed_mean(std::span<const double> values, int trim = 2);

struct ConvergenceCriteria {
  int window = kMovingAverageWindow;
  double threshold = 6.0;
  /// The moving average must stay at or above threshold over this many final epochs.
  int sustain = 200;
};

struct Convergence {
  bool converged = false;
  /// First epoch where the moving average reaches the threshold (set when converged).
  std::optional<int> epoch;
};

Convergence detect_convergence(std::span<const double> rewards, const ConvergenceCriteria& criteria = {});

struct RunMetrics {
  std::uint64_t seed = 0;
  std::vector<double> moving_avg;
  bool converged = false;
  std::optional<int> convergence_epoch;
  std::array<std::optional<int>, kRewardThresholds.size()> epochs_to_threshold;
};

RunMetrics compute_metrics(std::uint64_t seed, std::span<const double> rewards,
                           const ConvergenceCriteria& criteria = {});

}  // namespace vrail::harness
