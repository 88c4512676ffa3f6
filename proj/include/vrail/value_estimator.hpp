#pragma once

// Interpretable state-value estimators over binary state features:
//   linear     V(x) = w^T x
//   quadratic  V(x) = x^T W x
// fitted by full-batch gradient descent on mean squared error.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace vrail::estimator {

enum class Kind { Linear, Quadratic };

std::string_view kind_name(Kind kind);
Kind kind_from_name(std::string_view name);

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when fitting diverges or stops decreasing the loss.
class FitDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EstimatorParams {
  Kind kind = Kind::Linear;
  std::size_t dim = 0;
  std::vector<double> values;  // dim entries (linear) or dim*dim row-major (quadratic)

  static EstimatorParams zeros(Kind kind, std::size_t dim);

  std::size_t value_count() const { return kind == Kind::Linear ? dim : dim * dim; }
  double at(std::size_t i, std::size_t j) const { return values[i * dim + j]; }
  bool all_finite() const;
  void validate() const;

  friend bool operator==(const EstimatorParams&, const EstimatorParams&) = default;
};

double predict(const EstimatorParams& params, std::span<const double> x);

struct ValueSample {
  std::vector<double> features;
  double target = 0.0;
};

using ValueDataset = std::vector<ValueSample>;

/// Mean squared error of `params` over the dataset.
double mse(const EstimatorParams& params, const ValueDataset& data);

struct FitOptions {
  int epochs = 50;
  double lr = 1e-2;
  /// Zero-initialized gradient descent consumes no randomness; the seed is kept so
  /// runs record it alongside the other fit inputs.
  std::uint64_t seed = 0;
  /// Start from these params instead of zeros.
  std::optional<EstimatorParams> warm_start;
};

struct FitResult {
  EstimatorParams params;
  /// Training loss before the first step and after every epoch (epochs + 1 entries).
  std::vector<double> loss_history;
};

FitResult fit(const ValueDataset& data, Kind kind, const FitOptions& options = {});

struct FeatureWeight {
  std::size_t feature = 0;
  double weight = 0.0;
};

struct AttributionReport {
  EstimatorParams mean;
  std::size_t sample_count = 0;
  /// Linear: features by descending mean weight (ties by ascending index).
  std::vector<FeatureWeight> ranking;
  /// Quadratic: (W + W^T) / 2 of the mean, row-major.
  std::vector<double> symmetric;
};

AttributionReport attribution_report(std::span<const EstimatorParams> params_list);

/// Linear: feature_name,mean_weight. Quadratic: feature_i,feature_j,mean_weight.
void write_attribution_csv(std::ostream& out, const AttributionReport& report,
                           const std::vector<std::string>& feature_names);

nlohmann::json to_json(const EstimatorParams& params);
EstimatorParams params_from_json(const nlohmann::json& j);

}  // namespace vrail::estimator
