#pragma once

// Multi-seed studies: run many seeded training runs, summarize convergence and
// threshold-crossing speed, and emit curves, metrics and attribution reports.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vrail/bilevel_loop.hpp"
#include "vrail/metrics.hpp"
#include "vrail/value_estimator.hpp"

namespace vrail::harness {

enum class Model { Dqn, LinearVrail, QuadraticVrail, DqnFrozen };

std::string_view model_name(Model m);
Model model_from_name(std::string_view name);

struct StudySpec {
  Model model = Model::Dqn;
  std::vector<std::uint64_t> seeds;
  taxi::EnvConfig env;
  dqn::AgentConfig agent;
  bilevel::LoopConfig loop;  // estimator field is set from `model`
  /// Required for Model::DqnFrozen.
  std::optional<estimator::EstimatorParams> frozen_potential;
  ConvergenceCriteria criteria;
  /// Worker threads; 0 picks the hardware concurrency.
  int jobs = 0;
  /// Invoked (from worker threads) after each finished run.
  std::function<void(const bilevel::RunRecord&)> on_run_done;

  void validate() const;
};

struct ThresholdSummary {
  double threshold = 0.0;
  /// Trimmed mean over runs that reached the threshold; absent when too few did.
  std::optional<double> trimmed_mean;
  int reached = 0;
  int runs = 0;  // runs - reached are footnoted as excluded
};

struct StudyReport {
  Model model = Model::Dqn;
  std::vector<bilevel::RunRecord> records;
  std::vector<RunMetrics> metrics;
  int converged = 0;
  std::array<ThresholdSummary, kRewardThresholds.size()> table;
  /// Final-cycle estimator averaged over converged seeds (VRAIL models only).
  std::optional<estimator::AttributionReport> attribution;

  std::string tally() const;
};

/// Runs every seed of the study (in parallel per spec.jobs); a run that throws is
/// recorded with its error and the study continues.
std::vector<bilevel::RunRecord> run_seeds(const StudySpec& spec);

StudyReport build_report(Model model, std::vector<bilevel::RunRecord> records,
                         const ConvergenceCriteria& criteria = {}, int trim = 2);

StudyReport run_study(const StudySpec& spec);

/// Writes run_<seed>.json, curves_<seed>.csv, episodes.csv, metrics.json,
/// table1.csv and attribution_<kind>.csv (VRAIL models) into `out_dir`.
void write_report(const StudyReport& report, const std::filesystem::path& out_dir,
                  const taxi::EnvConfig& env);

/// Reloads run_<seed>.json files from a directory written by write_report.
std::vector<bilevel::RunRecord> load_run_records(const std::filesystem::path& dir);

/// Long-form epochs-to-threshold table: model,threshold,trimmed_mean,runs_reached,runs_total.
void write_table1(std::ostream& out, std::span<const StudyReport> reports);
nlohmann::json metrics_json(const StudyReport& report);

/// Converged run with the highest final moving average; nullptr when none converged.
const bilevel::RunRecord* select_transfer_source(const StudyReport& report);

struct TransferStudy {
  estimator::EstimatorParams potential;
  StudyReport baseline;
  StudyReport transfer;
};

/// Baseline DQN and DQN with the frozen potential over the same seeds.
TransferStudy run_transfer_study(const StudySpec& base, const estimator::EstimatorParams& potential);

}  // namespace vrail::harness
