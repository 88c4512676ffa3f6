#pragma once

// DQN with uniform experience replay, a periodically synchronized target
// network and epsilon-greedy exploration. One epoch is one episode.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "vrail/dense_net.hpp"
#include "vrail/shaping.hpp"
#include "vrail/taxi_env.hpp"

namespace vrail::dqn {

struct AgentConfig {
  double gamma = 0.99;
  double lr = 1e-3;
  int batch_size = 64;
  int buffer_capacity = 50000;
  int target_update_every = 10;  // epochs
  double epsilon_floor = 0.01;
  double epsilon_decay = 0.995;
  /// Decay epsilon per environment step instead of per epoch.
  bool per_step_epsilon = false;
  std::vector<int> hidden_layers{128, 128};
  nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;
  double grad_clip_norm = 10.0;
  /// Recompute shaped rewards with the current potential when a batch is sampled,
  /// so replayed transitions never mix potentials from earlier DL stages.
  bool reshape_at_sample = true;

  void validate() const;
};

/// max(decay^t, floor).
double epsilon(long t, double decay = 0.995, double floor = 0.01);

struct ReplayTransition {
  int state_index = 0;
  taxi::Action action = taxi::Action::South;
  double reward = 0.0;      // shaped at insertion
  double raw_reward = 0.0;  // environment reward
  int next_state_index = 0;
  bool terminal = false;
};

/// Fixed-capacity ring; once full, each push overwrites the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const ReplayTransition& t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return storage_.size(); }
  bool empty() const { return size_ == 0; }
  /// i = 0 is the oldest stored transition.
  const ReplayTransition& operator[](std::size_t i) const;
  /// Uniform draw with replacement.
  const ReplayTransition& sample(std::mt19937_64& rng) const;

 private:
  std::vector<ReplayTransition> storage_;
  std::size_t head_ = 0;  // next write position
  std::size_t size_ = 0;
};

/// reward + gamma * next_max_q * (1 - terminal).
inline double td_target(double reward, double gamma, double next_max_q, bool terminal) {
  return terminal ? reward : reward + gamma * next_max_q;
}

/// Index of the largest entry, lowest index on ties.
int greedy_action(std::span<const double> q_row);
taxi::Action select_action(std::span<const double> q_row, double epsilon, std::mt19937_64& rng);
taxi::Action select_action(const nn::NetworkParams& qnet, std::span<const double> features,
                           double epsilon, std::mt19937_64& rng);

/// Q-values for every encoded state: output_dim x 500.
Eigen::MatrixXd q_table(const nn::NetworkParams& qnet, const taxi::EnvConfig& env);
/// V(s) = max_a Q(s, a) for every encoded state.
std::vector<double> greedy_value_table(const nn::NetworkParams& qnet, const taxi::EnvConfig& env);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpisodeStats {
  double reward = 0.0;         // sum of environment rewards
  double shaped_reward = 0.0;  // sum of rewards as stored in the buffer
  int steps = 0;
  bool terminal = false;
  int gradient_steps = 0;
  double mean_loss = 0.0;
  double epsilon = 0.0;  // value at the start of the episode
  int start_state = 0;
};

/// Replaces epsilon-greedy action choice, e.g. to replay a known policy.
using BehaviorOverride = std::function<taxi::Action(const taxi::TaxiState&)>;

class Agent {
 public:
  Agent(AgentConfig config, taxi::EnvConfig env, std::uint64_t seed);

  EpisodeStats train_epoch(const shaping::Shaper& shaper, int epoch_index,
                           const BehaviorOverride& behavior = {});

  const AgentConfig& config() const { return config_; }
  const taxi::EnvConfig& env() const { return env_; }
  const nn::NetworkParams& online() const { return online_; }
  const nn::NetworkParams& target() const { return target_; }
  /// Direct parameter access; call sync_target() afterwards to keep the target consistent.
  nn::NetworkParams& mutable_online() { return online_; }
  void sync_target();

  const ReplayBuffer& buffer() const { return buffer_; }
  /// States seen as s or s' in any collected transition.
  const std::vector<bool>& visited() const { return visited_; }
  long total_steps() const { return total_steps_; }
  long gradient_steps() const { return optimizer_.steps_taken(); }

 private:
  std::span<const double> features(int state_index) const;
  double learn(const shaping::Shaper& shaper);

  AgentConfig config_;
  taxi::EnvConfig env_;
  std::mt19937_64 rng_;
  nn::NetworkParams online_;
  nn::NetworkParams target_;
  nn::Optimizer optimizer_;
  ReplayBuffer buffer_;
  Eigen::MatrixXd feature_matrix_;  // dim x 500
  Eigen::MatrixXd target_q_;        // 6 x 500, refreshed on every sync
  std::vector<bool> visited_;
  long total_steps_ = 0;
};

}  // namespace vrail::dqn
