#include "vrail/bilevel_loop.hpp"

#include <stdexcept>

namespace vrail::bilevel {

std::string_view estimator_choice_name(EstimatorChoice c) {
  switch (c) {
    case EstimatorChoice::None: return "none";
    case EstimatorChoice::Linear: return "linear";
    case EstimatorChoice::Quadratic: return "quadratic";
  }
  return "?";
}

EstimatorChoice estimator_choice_from_name(std::string_view name) {
  if (name == "none" || name == "dqn") return EstimatorChoice::None;
  if (name == "linear") return EstimatorChoice::Linear;
  if (name == "quadratic") return EstimatorChoice::Quadratic;
  throw std::invalid_argument("unknown estimator kind '" + std::string(name) + "'");
}

void LoopConfig::validate() const {
  if (outer_cycles < 1) throw std::invalid_argument("outer_cycles must be >= 1");
  if (rl_epochs_per_cycle < 1) throw std::invalid_argument("rl_epochs_per_cycle must be >= 1");
  if (dl_epochs < 0) throw std::invalid_argument("dl_epochs must be >= 0");
  if (!(dl_lr > 0.0)) throw std::invalid_argument("dl_lr must be positive");
}

estimator::ValueDataset build_value_dataset(const nn::NetworkParams& qnet, const taxi::EnvConfig& env,
                                            const std::vector<bool>* visited) {
  const std::vector<double> values = dqn::greedy_value_table(qnet, env);
  estimator::ValueDataset data;
  data.reserve(taxi::kNumStates);
  for (int s = 0; s < taxi::kNumStates; ++s) {
    if (visited && !(*visited)[static_cast<std::size_t>(s)]) continue;
    data.push_back({taxi::extract_features(taxi::decode_state(s), env),
                    values[static_cast<std::size_t>(s)]});
  }
  return data;
}

void finalize_convergence(RunRecord& record, const harness::ConvergenceCriteria& criteria) {
  const harness::Convergence c = harness::detect_convergence(record.rewards, criteria);
  record.converged = c.converged;
  record.convergence_epoch = c.epoch;
}

namespace {

void record_epoch(RunRecord& record, int epoch, const dqn::EpisodeStats& stats,
                  const EpochCallback& on_epoch) {
  record.rewards.push_back(stats.reward);
  record.epsilons.push_back(stats.epsilon);
  if (on_epoch) on_epoch(epoch, stats);
}

}  // namespace

RunRecord run(const LoopConfig& loop, const dqn::AgentConfig& agent_config,
              const taxi::EnvConfig& env, std::uint64_t seed, const EpochCallback& on_epoch) {
  loop.validate();
  RunRecord record;
  record.seed = seed;
  record.model = loop.estimator == EstimatorChoice::None ? "dqn"
                                                          : std::string(estimator_choice_name(loop.estimator));
  dqn::Agent agent(agent_config, env, seed);
  shaping::Shaper shaper = shaping::identity_shaper(agent_config.gamma);
  std::optional<estimator::EstimatorParams> previous;
  try {
    for (int cycle = 0; cycle < loop.outer_cycles; ++cycle) {
      for (int e = 0; e < loop.rl_epochs_per_cycle; ++e) {
        const int epoch = cycle * loop.rl_epochs_per_cycle + e;
        record_epoch(record, epoch, agent.train_epoch(shaper, epoch), on_epoch);
      }
      if (loop.estimator == EstimatorChoice::None) continue;

      const estimator::Kind kind = loop.estimator == EstimatorChoice::Linear
                                       ? estimator::Kind::Linear
                                       : estimator::Kind::Quadratic;
      const estimator::ValueDataset data = build_value_dataset(
          loop.targets_from_target_network ? agent.target() : agent.online(), env,
          loop.visited_only ? &agent.visited() : nullptr);
      estimator::FitOptions fit_options;
      fit_options.epochs = loop.dl_epochs;
      fit_options.lr = loop.dl_lr;
      fit_options.seed = seed;
      if (loop.warm_start) fit_options.warm_start = previous;
      estimator::FitResult fitted = estimator::fit(data, kind, fit_options);
      previous = fitted.params;
      record.snapshots.push_back(fitted.params);
      shaper.potential = std::move(fitted.params);
    }
  } catch (const dqn::TrainingDiverged& e) {
    record.error = e.what();
  } catch (const estimator::FitDiverged& e) {
    record.error = e.what();
  }
  finalize_convergence(record);
  return record;
}

RunRecord run_fixed_shaper(const shaping::Shaper& shaper, const dqn::AgentConfig& agent_config,
                           const taxi::EnvConfig& env, std::uint64_t seed, int total_epochs,
                           const EpochCallback& on_epoch) {
  if (total_epochs < 1) throw std::invalid_argument("total_epochs must be >= 1");
  RunRecord record;
  record.seed = seed;
  record.model = shaper.is_identity() ? "dqn" : "dqn+frozen";
  dqn::Agent agent(agent_config, env, seed);
  try {
    for (int epoch = 0; epoch < total_epochs; ++epoch) {
      record_epoch(record, epoch, agent.train_epoch(shaper, epoch), on_epoch);
    }
  } catch (const dqn::TrainingDiverged& e) {
    record.error = e.what();
  }
  finalize_convergence(record);
  return record;
}

RunRecord transfer_run(const estimator::EstimatorParams& frozen, const dqn::AgentConfig& agent_config,
                       const taxi::EnvConfig& env, std::uint64_t seed, int total_epochs,
                       const EpochCallback& on_epoch) {
  frozen.validate();
  if (frozen.dim != env.feature_dim()) {
    throw estimator::DimensionMismatch("frozen potential has dimension " + std::to_string(frozen.dim) +
                                       ", environment features have " +
                                       std::to_string(env.feature_dim()));
  }
  RunRecord record = run_fixed_shaper(shaping::Shaper{frozen, agent_config.gamma}, agent_config, env,
                                      seed, total_epochs, on_epoch);
  record.model = "dqn+frozen";
  return record;
}

nlohmann::json to_json(const RunRecord& record) {
  nlohmann::json snapshots = nlohmann::json::array();
  for (const auto& p : record.snapshots) snapshots.push_back(estimator::to_json(p));
  nlohmann::json j{{"seed", record.seed},
                   {"model", record.model},
                   {"rewards", record.rewards},
                   {"epsilons", record.epsilons},
                   {"snapshots", snapshots},
                   {"converged", record.converged}};
  j["convergence_epoch"] = record.convergence_epoch ? nlohmann::json(*record.convergence_epoch)
                                                    : nlohmann::json(nullptr);
  j["error"] = record.error ? nlohmann::json(*record.error) : nlohmann::json(nullptr);
  return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.model = j.at("model").get<std::string>();
  r.rewards = j.at("rewards").get<std::vector<double>>();
  r.epsilons = j.at("epsilons").get<std::vector<double>>();
  for (const auto& s : j.at("snapshots")) r.snapshots.push_back(estimator::params_from_json(s));
  r.converged = j.at("converged").get<bool>();
  if (!j.at("convergence_epoch").is_null()) r.convergence_epoch = j.at("convergence_epoch").get<int>();
  if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  return r;
}

}  // namespace vrail::bilevel
