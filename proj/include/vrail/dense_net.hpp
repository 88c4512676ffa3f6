#pragma once

// Small fully connected network with hand-written backprop. Batches are stored
// column-wise: an input matrix is input_dim x batch.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vrail::nn {

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Activation { Relu };

struct NetworkSpec {
  int input_dim = 0;
  std::vector<int> hidden_layers;
  int output_dim = 0;
  Activation activation = Activation::Relu;

  void validate() const;
};

struct Layer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// Parameters and gradients share this layout.
struct NetworkParams {
  std::vector<Layer> layers;

  int input_dim() const;
  int output_dim() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
  bool same_shape(const NetworkParams& other) const;

  /// Zeros with the same shapes as `like`.
  static NetworkParams zeros_like(const NetworkParams& like);

  friend bool operator==(const NetworkParams& a, const NetworkParams& b);
};

/// Uniform fan-in initialization: every weight and bias ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
NetworkParams initialize(const NetworkSpec& spec, std::mt19937_64& rng);
NetworkParams initialize(const NetworkSpec& spec, std::uint64_t seed);

/// Pre-activations and activations recorded by a batched forward pass.
struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre_activations;  // one per layer
  std::vector<Eigen::MatrixXd> activations;      // output of each hidden layer
};

Eigen::VectorXd forward(const NetworkParams& params, std::span<const double> input);
Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                              ForwardCache* cache = nullptr);

/// Gradients of a scalar loss given dLoss/dOutput for the batch cached by forward_batch.
NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                       const Eigen::MatrixXd& output_gradient);
NetworkParams backward(const NetworkParams& params, std::span<const double> input,
                       std::span<const double> output_gradient);

double global_norm(const NetworkParams& grads);
/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
void clip_global_norm(NetworkParams& grads, double max_norm);

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  Optimizer(const NetworkParams& like, OptimizerConfig config = {});

  /// Applies one update. Throws NonFiniteGradient before touching params if any
  /// gradient entry is NaN or infinite.
  void step(NetworkParams& params, const NetworkParams& grads, double learning_rate);

  long steps_taken() const { return t_; }

 private:
  OptimizerConfig config_;
  NetworkParams m_;
  NetworkParams v_;
  long t_ = 0;
};

nlohmann::json to_json(const NetworkParams& params);
NetworkParams network_from_json(const nlohmann::json& j);
void save(const NetworkParams& params, const std::string& path);
NetworkParams load(const std::string& path);

}  // namespace vrail::nn
