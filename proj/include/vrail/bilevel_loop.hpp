#pragma once

// Alternating RL / DL optimization: each outer cycle trains the DQN for a block
// of episodes under the current shaper, then refits the value estimator to the
// network's greedy values and installs it as the next shaping potential.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vrail/dqn_agent.hpp"
#include "vrail/metrics.hpp"
#include "vrail/taxi_env.hpp"
#include "vrail/value_estimator.hpp"

namespace vrail::bilevel {

enum class EstimatorChoice { None, Linear, Quadratic };

std::string_view estimator_choice_name(EstimatorChoice c);
EstimatorChoice estimator_choice_from_name(std::string_view name);

struct LoopConfig {
  int outer_cycles = 20;
  int rl_epochs_per_cycle = 100;
  int dl_epochs = 50;
  double dl_lr = 1e-2;
  EstimatorChoice estimator = EstimatorChoice::None;
  /// Start each DL fit from the previous cycle's params.
  bool warm_start = true;
  /// Fit only on states visited so far instead of all 500.
  bool visited_only = false;
  /// Take V(s) from the target network instead of the online network.
  bool targets_from_target_network = false;

  int total_epochs() const { return outer_cycles * rl_epochs_per_cycle; }
  void validate() const;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::string model;  // "dqn", "linear", "quadratic", "dqn+frozen"
  std::vector<double> rewards;   // unshaped, one per epoch
  std::vector<double> epsilons;  // exploration rate at the start of each epoch
  std::vector<estimator::EstimatorParams> snapshots;  // one per DL stage
  bool converged = false;
  std::optional<int> convergence_epoch;
  /// Set when the run aborted; the series above are then partial.
  std::optional<std::string> error;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Called after every training epoch: (epoch, stats).
using EpochCallback = std::function<void(int, const dqn::EpisodeStats&)>;

/// One (features, max_a Q(s, a)) pair per encoded state, optionally restricted to `visited`.
estimator::ValueDataset build_value_dataset(const nn::NetworkParams& qnet, const taxi::EnvConfig& env,
                                            const std::vector<bool>* visited = nullptr);

RunRecord run(const LoopConfig& loop, const dqn::AgentConfig& agent, const taxi::EnvConfig& env,
              std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Plain DQN under a fixed shaper for `total_epochs` episodes.
RunRecord run_fixed_shaper(const shaping::Shaper& shaper, const dqn::AgentConfig& agent,
                           const taxi::EnvConfig& env, std::uint64_t seed, int total_epochs,
                           const EpochCallback& on_epoch = {});

/// DQN with a frozen pretrained potential; no DL stages.
RunRecord transfer_run(const estimator::EstimatorParams& frozen, const dqn::AgentConfig& agent,
                       const taxi::EnvConfig& env, std::uint64_t seed, int total_epochs,
                       const EpochCallback& on_epoch = {});

/// Fills `converged`/`convergence_epoch` from the reward series.
void finalize_convergence(RunRecord& record, const harness::ConvergenceCriteria& criteria = {});

nlohmann::json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);

}  // namespace vrail::bilevel
