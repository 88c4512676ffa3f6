#include "vrail/dense_net.hpp"

#include <cmath>
#include <fstream>

namespace vrail::nn {

void NetworkSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw ShapeMismatch("network dimensions must be >= 1");
  }
  for (int h : hidden_layers) {
    if (h < 1) throw ShapeMismatch("hidden layer width must be >= 1");
  }
}

int NetworkParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols());
}

int NetworkParams::output_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows());
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

bool NetworkParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

bool NetworkParams::same_shape(const NetworkParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weights.rows() != other.layers[i].weights.rows() ||
        layers[i].weights.cols() != other.layers[i].weights.cols() ||
        layers[i].bias.size() != other.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

NetworkParams NetworkParams::zeros_like(const NetworkParams& like) {
  NetworkParams z;
  z.layers.reserve(like.layers.size());
  for (const auto& l : like.layers) {
    z.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  return z;
}

bool operator==(const NetworkParams& a, const NetworkParams& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weights != b.layers[i].weights || a.layers[i].bias != b.layers[i].bias) {
      return false;
    }
  }
  return true;
}

NetworkParams initialize(const NetworkSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  std::vector<int> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden_layers.begin(), spec.hidden_layers.end());
  dims.push_back(spec.output_dim);

  NetworkParams params;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Layer layer{Eigen::MatrixXd(dims[i + 1], dims[i]), Eigen::VectorXd(dims[i + 1])};
    // Fill order is fixed (column-major weights, then bias) so a seed pins every value.
    for (Eigen::Index k = 0; k < layer.weights.size(); ++k) layer.weights.data()[k] = u(rng);
    for (Eigen::Index k = 0; k < layer.bias.size(); ++k) layer.bias[k] = u(rng);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

NetworkParams initialize(const NetworkSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return initialize(spec, rng);
}

Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                              ForwardCache* cache) {
  if (params.layers.empty()) throw ShapeMismatch("network has no layers");
  if (inputs.rows() != params.input_dim()) {
    throw ShapeMismatch("input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                        std::to_string(params.input_dim()));
  }
  if (cache) {
    cache->input = inputs;
    cache->pre_activations.clear();
    cache->activations.clear();
  }
  Eigen::MatrixXd h = inputs;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const Layer& layer = params.layers[i];
    Eigen::MatrixXd z = layer.weights * h;
    z.colwise() += layer.bias;
    const bool last = i + 1 == params.layers.size();
    if (last) {
      if (cache) cache->pre_activations.push_back(z);
      return z;
    }
    h = z.cwiseMax(0.0);
    if (cache) {
      cache->pre_activations.push_back(std::move(z));
      cache->activations.push_back(h);
    }
  }
  return h;
}

Eigen::VectorXd forward(const NetworkParams& params, std::span<const double> input) {
  Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(input.size()));
  return forward_batch(params, Eigen::MatrixXd(x));
}

NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                       const Eigen::MatrixXd& output_gradient) {
  if (cache.pre_activations.size() != params.layers.size()) {
    throw ShapeMismatch("forward cache does not match network depth");
  }
  if (output_gradient.rows() != params.output_dim() ||
      output_gradient.cols() != cache.input.cols()) {
    throw ShapeMismatch("output gradient shape does not match the cached batch");
  }
  NetworkParams grads;
  grads.layers.resize(params.layers.size());
  Eigen::MatrixXd delta = output_gradient;
  for (std::size_t idx = params.layers.size(); idx-- > 0;) {
    const Eigen::MatrixXd& layer_input = idx == 0 ? cache.input : cache.activations[idx - 1];
    grads.layers[idx].weights = delta * layer_input.transpose();
    grads.layers[idx].bias = delta.rowwise().sum();
    if (idx > 0) {
      Eigen::MatrixXd upstream = params.layers[idx].weights.transpose() * delta;
      const Eigen::MatrixXd& z = cache.pre_activations[idx - 1];
      delta = upstream.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    }
  }
  return grads;
}

NetworkParams backward(const NetworkParams& params, std::span<const double> input,
                       std::span<const double> output_gradient) {
  Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(input.size()));
  Eigen::Map<const Eigen::VectorXd> g(output_gradient.data(),
                                      static_cast<Eigen::Index>(output_gradient.size()));
  ForwardCache cache;
  forward_batch(params, Eigen::MatrixXd(x), &cache);
  return backward(params, cache, Eigen::MatrixXd(g));
}

double global_norm(const NetworkParams& grads) {
  double sq = 0.0;
  for (const auto& l : grads.layers) sq += l.weights.squaredNorm() + l.bias.squaredNorm();
  return std::sqrt(sq);
}

void clip_global_norm(NetworkParams& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& l : grads.layers) {
      l.weights *= scale;
      l.bias *= scale;
    }
  }
}

Optimizer::Optimizer(const NetworkParams& like, OptimizerConfig config)
    : config_(config), m_(NetworkParams::zeros_like(like)), v_(NetworkParams::zeros_like(like)) {}

void Optimizer::step(NetworkParams& params, const NetworkParams& grads, double learning_rate) {
  if (!params.same_shape(grads) || !params.same_shape(m_)) {
    throw ShapeMismatch("optimizer step: parameter and gradient shapes differ");
  }
  if (!grads.all_finite()) {
    throw NonFiniteGradient("optimizer step received a non-finite gradient");
  }
  ++t_;
  if (config_.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
      params.layers[i].weights -= learning_rate * grads.layers[i].weights;
      params.layers[i].bias -= learning_rate * grads.layers[i].bias;
    }
    return;
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double step_size = learning_rate * std::sqrt(correction2) / correction1;
  const double eps_hat = config_.epsilon * std::sqrt(correction2);
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= step_size * m.array() / (v.array().sqrt() + eps_hat);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weights, grads.layers[i].weights, m_.layers[i].weights,
           v_.layers[i].weights);
    update(params.layers[i].bias, grads.layers[i].bias, m_.layers[i].bias, v_.layers[i].bias);
  }
}

nlohmann::json to_json(const NetworkParams& params) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params.layers) {
    std::vector<double> w(l.weights.size());
    // Row-major on disk.
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        w[static_cast<std::size_t>(r * l.weights.cols() + c)] = l.weights(r, c);
      }
    }
    layers.push_back({{"rows", l.weights.rows()},
                      {"cols", l.weights.cols()},
                      {"weights", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return {{"format", "vrail-dense-net"}, {"version", 1}, {"layers", layers}};
}

NetworkParams network_from_json(const nlohmann::json& j) {
  NetworkParams params;
  for (const auto& jl : j.at("layers")) {
    const auto rows = jl.at("rows").get<Eigen::Index>();
    const auto cols = jl.at("cols").get<Eigen::Index>();
    const auto w = jl.at("weights").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (rows < 1 || cols < 1 || static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != rows) {
      throw ShapeMismatch("layer values do not match the declared shape");
    }
    Layer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        layer.weights(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      }
      layer.bias[r] = b[static_cast<std::size_t>(r)];
    }
    if (!params.layers.empty() && params.layers.back().weights.rows() != cols) {
      throw ShapeMismatch("consecutive layer shapes do not chain");
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

void save(const NetworkParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << to_json(params).dump();
}

NetworkParams load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return network_from_json(nlohmann::json::parse(in));
}

}  // namespace vrail::nn
