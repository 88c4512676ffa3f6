#include "vrail/dqn_agent.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vrail::dqn {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id)};
  return std::mt19937_64(seq);
}

}  // namespace

void AgentConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (buffer_capacity < batch_size) {
    throw std::invalid_argument("buffer_capacity must be >= batch_size");
  }
  if (target_update_every < 1) throw std::invalid_argument("target_update_every must be >= 1");
  if (!(epsilon_floor > 0.0 && epsilon_floor < 1.0)) {
    throw std::invalid_argument("epsilon_floor must lie in (0, 1)");
  }
  if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) {
    throw std::invalid_argument("epsilon_decay must lie in (0, 1]");
  }
  if (!(grad_clip_norm > 0.0)) throw std::invalid_argument("grad_clip_norm must be positive");
}

double epsilon(long t, double decay, double floor) {
  if (t < 0) throw std::invalid_argument("epsilon schedule needs t >= 0");
  return std::max(std::pow(decay, static_cast<double>(t)), floor);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : storage_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be >= 1");
}

void ReplayBuffer::push(const ReplayTransition& t) {
  storage_[head_] = t;
  head_ = (head_ + 1) % storage_.size();
  size_ = std::min(size_ + 1, storage_.size());
}

const ReplayTransition& ReplayBuffer::operator[](std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay buffer index out of range");
  const std::size_t oldest = size_ < storage_.size() ? 0 : head_;
  return storage_[(oldest + i) % storage_.size()];
}

const ReplayTransition& ReplayBuffer::sample(std::mt19937_64& rng) const {
  if (size_ == 0) throw std::out_of_range("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  return storage_[pick(rng)];
}

int greedy_action(std::span<const double> q_row) {
  if (q_row.empty()) throw std::invalid_argument("empty Q row");
  return static_cast<int>(std::max_element(q_row.begin(), q_row.end()) - q_row.begin());
}

taxi::Action select_action(std::span<const double> q_row, double eps, std::mt19937_64& rng) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < eps) {
    std::uniform_int_distribution<int> any(0, taxi::kNumActions - 1);
    return taxi::action_from_index(any(rng));
  }
  return taxi::action_from_index(greedy_action(q_row));
}

taxi::Action select_action(const nn::NetworkParams& qnet, std::span<const double> features,
                           double eps, std::mt19937_64& rng) {
  const Eigen::VectorXd q = nn::forward(qnet, features);
  return select_action(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), eps,
                       rng);
}

Eigen::MatrixXd q_table(const nn::NetworkParams& qnet, const taxi::EnvConfig& env) {
  const std::vector<double> table = taxi::feature_table(env);
  const Eigen::Map<const Eigen::MatrixXd> inputs(
      table.data(), static_cast<Eigen::Index>(env.feature_dim()), taxi::kNumStates);
  return nn::forward_batch(qnet, inputs);
}

std::vector<double> greedy_value_table(const nn::NetworkParams& qnet, const taxi::EnvConfig& env) {
  const Eigen::MatrixXd q = q_table(qnet, env);
  std::vector<double> values(taxi::kNumStates);
  for (int s = 0; s < taxi::kNumStates; ++s) values[static_cast<std::size_t>(s)] = q.col(s).maxCoeff();
  return values;
}

Agent::Agent(AgentConfig config, taxi::EnvConfig env, std::uint64_t seed)
    : config_(std::move(config)),
      env_(env),
      rng_(stream(seed, 1)),
      online_([&] {
        config_.validate();
        env_.validate();
        auto init_rng = stream(seed, 0);
        return nn::initialize(
            nn::NetworkSpec{static_cast<int>(env_.feature_dim()), config_.hidden_layers,
                            taxi::kNumActions},
            init_rng);
      }()),
      target_(online_),
      optimizer_(online_, nn::OptimizerConfig{config_.optimizer}),
      buffer_(static_cast<std::size_t>(config_.buffer_capacity)),
      visited_(taxi::kNumStates, false) {
  const std::vector<double> table = taxi::feature_table(env_);
  feature_matrix_ = Eigen::Map<const Eigen::MatrixXd>(
      table.data(), static_cast<Eigen::Index>(env_.feature_dim()), taxi::kNumStates);
  target_q_ = nn::forward_batch(target_, feature_matrix_);
}

void Agent::sync_target() {
  target_ = online_;
  target_q_ = nn::forward_batch(target_, feature_matrix_);
}

std::span<const double> Agent::features(int state_index) const {
  return {feature_matrix_.col(state_index).data(), env_.feature_dim()};
}

EpisodeStats Agent::train_epoch(const shaping::Shaper& shaper, int epoch_index,
                                const BehaviorOverride& behavior) {
  if (epoch_index < 0) throw std::invalid_argument("epoch index must be >= 0");
  EpisodeStats stats;
  const auto current_epsilon = [&] {
    return epsilon(config_.per_step_epsilon ? total_steps_ : epoch_index, config_.epsilon_decay,
                   config_.epsilon_floor);
  };
  stats.epsilon = current_epsilon();

  taxi::TaxiState state = taxi::reset(rng_);
  stats.start_state = taxi::encode_state(state);
  double loss_sum = 0.0;
  for (int t = 0; t < env_.max_episode_steps; ++t) {
    const int s = taxi::encode_state(state);
    visited_[static_cast<std::size_t>(s)] = true;
    taxi::Action action;
    if (behavior) {
      action = behavior(state);
    } else {
      action = select_action(online_, features(s), current_epsilon(), rng_);
    }
    const taxi::StepOutcome out = taxi::step(state, action, env_);
    const int next = taxi::encode_state(out.next_state);
    visited_[static_cast<std::size_t>(next)] = true;

    const double shaped =
        shaping::shaped_reward(shaper, out.reward, features(s), features(next), out.terminal);
    buffer_.push({s, action, shaped, out.reward, next, out.terminal});
    stats.reward += out.reward;
    stats.shaped_reward += shaped;
    ++stats.steps;
    ++total_steps_;

    if (buffer_.size() >= static_cast<std::size_t>(config_.batch_size)) {
      loss_sum += learn(shaper);
      ++stats.gradient_steps;
    }
    state = out.next_state;
    if (out.terminal) {
      stats.terminal = true;
      break;
    }
  }
  if (stats.gradient_steps > 0) stats.mean_loss = loss_sum / stats.gradient_steps;
  if ((epoch_index + 1) % config_.target_update_every == 0) sync_target();
  return stats;
}

double Agent::learn(const shaping::Shaper& shaper) {
  const int batch = config_.batch_size;
  const auto dim = static_cast<Eigen::Index>(env_.feature_dim());
  Eigen::MatrixXd inputs(dim, batch);
  std::vector<const ReplayTransition*> samples(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) {
    const ReplayTransition& tr = buffer_.sample(rng_);
    samples[static_cast<std::size_t>(i)] = &tr;
    inputs.col(i) = feature_matrix_.col(tr.state_index);
  }

  nn::ForwardCache cache;
  const Eigen::MatrixXd q = nn::forward_batch(online_, inputs, &cache);
  Eigen::MatrixXd output_grad = Eigen::MatrixXd::Zero(q.rows(), batch);
  double loss = 0.0;
  for (int i = 0; i < batch; ++i) {
    const ReplayTransition& tr = *samples[static_cast<std::size_t>(i)];
    const double reward =
        config_.reshape_at_sample
            ? shaping::shaped_reward(shaper, tr.raw_reward, features(tr.state_index),
                                     features(tr.next_state_index), tr.terminal)
            : tr.reward;
    const double target = td_target(reward, config_.gamma,
                                    target_q_.col(tr.next_state_index).maxCoeff(), tr.terminal);
    const int a = taxi::to_index(tr.action);
    const double td = q(a, i) - target;
    loss += td * td;
    output_grad(a, i) = 2.0 * td / batch;
  }
  loss /= batch;
  if (!std::isfinite(loss)) {
    std::ostringstream os;
    os << "DQN loss became non-finite after " << optimizer_.steps_taken() << " gradient steps";
    throw TrainingDiverged(os.str());
  }
  nn::NetworkParams grads = nn::backward(online_, cache, output_grad);
  nn::clip_global_norm(grads, config_.grad_clip_norm);
  optimizer_.step(online_, grads, config_.lr);
  return loss;
}

}  // namespace vrail::dqn
