#include "vrail/value_estimator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace vrail::estimator {

namespace {

void check_dim(const EstimatorParams& params, std::size_t n) {
  if (n != params.dim) {
    throw DimensionMismatch("feature vector has " + std::to_string(n) +
                            " entries, estimator expects " + std::to_string(params.dim));
  }
}

}  // namespace

std::string_view kind_name(Kind kind) { return kind == Kind::Linear ? "linear" : "quadratic"; }

Kind kind_from_name(std::string_view name) {
  if (name == "linear") return Kind::Linear;
  if (name == "quadratic") return Kind::Quadratic;
  throw std::invalid_argument("unknown estimator kind '" + std::string(name) + "'");
}

EstimatorParams EstimatorParams::zeros(Kind kind, std::size_t dim) {
  EstimatorParams p{kind, dim, {}};
  p.values.assign(p.value_count(), 0.0);
  return p;
}

bool EstimatorParams::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void EstimatorParams::validate() const {
  if (dim == 0) throw DimensionMismatch("estimator dimension must be >= 1");
  if (values.size() != value_count()) {
    throw DimensionMismatch("estimator holds " + std::to_string(values.size()) +
                            " values, expected " + std::to_string(value_count()));
  }
  if (!all_finite()) throw std::invalid_argument("estimator params contain non-finite values");
}

double predict(const EstimatorParams& params, std::span<const double> x) {
  check_dim(params, x.size());
  double v = 0.0;
  if (params.kind == Kind::Linear) {
    for (std::size_t i = 0; i < x.size(); ++i) v += params.values[i] * x[i];
    return v;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) continue;
    double row = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) row += params.at(i, j) * x[j];
    v += x[i] * row;
  }
  return v;
}

double mse(const EstimatorParams& params, const ValueDataset& data) {
  if (data.empty()) throw std::invalid_argument("mse of an empty dataset");
  double sum = 0.0;
  for (const auto& s : data) {
    const double e = s.target - predict(params, s.features);
    sum += e * e;
  }
  return sum / static_cast<double>(data.size());
}

FitResult fit(const ValueDataset& data, Kind kind, const FitOptions& options) {
  if (data.empty()) throw std::invalid_argument("cannot fit an estimator to an empty dataset");
  if (options.epochs < 0) throw std::invalid_argument("fit epochs must be >= 0");
  const std::size_t dim = data.front().features.size();
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto d = static_cast<Eigen::Index>(dim);

  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = data[static_cast<std::size_t>(i)];
    if (s.features.size() != dim) {
      throw DimensionMismatch("dataset rows have inconsistent feature dimensions");
    }
    if (!std::isfinite(s.target)) throw std::invalid_argument("dataset target is not finite");
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = s.features[static_cast<std::size_t>(j)];
    y[i] = s.target;
  }

  EstimatorParams params = options.warm_start.value_or(EstimatorParams::zeros(kind, dim));
  if (params.kind != kind || params.dim != dim) {
    throw DimensionMismatch("warm-start params do not match the requested kind/dimension");
  }
  params.validate();

  const std::size_t count = params.value_count();
  Eigen::Map<Eigen::VectorXd> theta(params.values.data(), static_cast<Eigen::Index>(count));

  auto predictions = [&]() -> Eigen::VectorXd {
    if (kind == Kind::Linear) return x * theta;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        params.values.data(), d, d);
    return (x * w).cwiseProduct(x).rowwise().sum();
  };

  const double inv_n = 1.0 / static_cast<double>(n);
  FitResult result;
  Eigen::VectorXd residual = y - predictions();
  double loss = residual.squaredNorm() * inv_n;
  result.loss_history.push_back(loss);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    // d/dtheta of (1/n) sum (y - yhat)^2 = -(2/n) sum residual * dyhat/dtheta.
    if (kind == Kind::Linear) {
      theta += (options.lr * 2.0 * inv_n) * (x.transpose() * residual);
    } else {
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> grad =
          x.transpose() * residual.asDiagonal() * x;
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
          params.values.data(), d, d);
      w += (options.lr * 2.0 * inv_n) * grad;
    }
    residual = y - predictions();
    const double next = residual.squaredNorm() * inv_n;
    if (!std::isfinite(next)) {
      std::ostringstream os;
      os << "estimator fit diverged at epoch " << epoch + 1 << " (loss not finite) with lr "
         << options.lr;
      throw FitDiverged(os.str());
    }
    // Allow rounding noise once the loss has flattened out.
    if (next > loss * (1.0 + 1e-12) + 1e-24) {
      std::ostringstream os;
      os << "estimator fit loss increased at epoch " << epoch + 1 << " (" << loss << " -> "
         << next << ") with lr " << options.lr;
      throw FitDiverged(os.str());
    }
    loss = next;
    result.loss_history.push_back(loss);
  }
  result.params = std::move(params);
  return result;
}

AttributionReport attribution_report(std::span<const EstimatorParams> params_list) {
  if (params_list.empty()) throw std::invalid_argument("attribution report needs at least one params");
  const EstimatorParams& first = params_list.front();
  AttributionReport report;
  report.sample_count = params_list.size();
  report.mean = EstimatorParams::zeros(first.kind, first.dim);
  for (const auto& p : params_list) {
    if (p.kind != first.kind || p.dim != first.dim) {
      throw DimensionMismatch("attribution report mixes estimator kinds or dimensions");
    }
    p.validate();
    for (std::size_t k = 0; k < p.values.size(); ++k) report.mean.values[k] += p.values[k];
  }
  const double inv = 1.0 / static_cast<double>(params_list.size());
  for (double& v : report.mean.values) v *= inv;

  if (first.kind == Kind::Linear) {
    for (std::size_t i = 0; i < first.dim; ++i) report.ranking.push_back({i, report.mean.values[i]});
    std::stable_sort(report.ranking.begin(), report.ranking.end(),
                     [](const FeatureWeight& a, const FeatureWeight& b) { return a.weight > b.weight; });
  } else {
    const std::size_t d = first.dim;
    report.symmetric.resize(d * d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        report.symmetric[i * d + j] = 0.5 * (report.mean.at(i, j) + report.mean.at(j, i));
      }
    }
  }
  return report;
}

void write_attribution_csv(std::ostream& out, const AttributionReport& report,
                           const std::vector<std::string>& feature_names) {
  const std::size_t d = report.mean.dim;
  if (feature_names.size() != d) {
    throw DimensionMismatch("feature name count does not match estimator dimension");
  }
  const auto old_precision = out.precision(17);
  if (report.mean.kind == Kind::Linear) {
    out << "feature_name,mean_weight\n";
    for (const auto& fw : report.ranking) out << feature_names[fw.feature] << ',' << fw.weight << '\n';
  } else {
    out << "feature_i,feature_j,mean_weight\n";
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        out << feature_names[i] << ',' << feature_names[j] << ',' << report.symmetric[i * d + j]
            << '\n';
      }
    }
  }
  out.precision(old_precision);
}

nlohmann::json to_json(const EstimatorParams& params) {
  return {{"kind", kind_name(params.kind)}, {"dim", params.dim}, {"values", params.values}};
}

EstimatorParams params_from_json(const nlohmann::json& j) {
  EstimatorParams p;
  p.kind = kind_from_name(j.at("kind").get<std::string>());
  p.dim = j.at("dim").get<std::size_t>();
  p.values = j.at("values").get<std::vector<double>>();
  p.validate();
  return p;
}

}  // namespace vrail::estimator
