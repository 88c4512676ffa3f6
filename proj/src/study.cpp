#include "vrail/study.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace vrail::harness {

namespace fs = std::filesystem;

std::string_view model_name(Model m) {
  switch (m) {
    case Model::Dqn: return "dqn";
    case Model::LinearVrail: return "linear";
    case Model::QuadraticVrail: return "quadratic";
    case Model::DqnFrozen: return "dqn+frozen";
  }
  return "?";
}

Model model_from_name(std::string_view name) {
  if (name == "dqn") return Model::Dqn;
  if (name == "linear") return Model::LinearVrail;
  if (name == "quadratic") return Model::QuadraticVrail;
  if (name == "dqn+frozen" || name == "frozen") return Model::DqnFrozen;
  throw std::invalid_argument("unknown model '" + std::string(name) +
                              "' (expected dqn, linear, quadratic or dqn+frozen)");
}

void StudySpec::validate() const {
  if (seeds.empty()) throw std::invalid_argument("a study needs at least one seed");
  if (model == Model::DqnFrozen && !frozen_potential) {
    throw std::invalid_argument("the dqn+frozen model needs a frozen potential");
  }
  env.validate();
  agent.validate();
  loop.validate();
}

std::string StudyReport::tally() const {
  return std::to_string(converged) + "/" + std::to_string(records.size());
}

namespace {

bilevel::RunRecord run_one(const StudySpec& spec, std::uint64_t seed) {
  try {
    bilevel::LoopConfig loop = spec.loop;
    switch (spec.model) {
      case Model::Dqn: loop.estimator = bilevel::EstimatorChoice::None; break;
      case Model::LinearVrail: loop.estimator = bilevel::EstimatorChoice::Linear; break;
      case Model::QuadraticVrail: loop.estimator = bilevel::EstimatorChoice::Quadratic; break;
      case Model::DqnFrozen:
        return bilevel::transfer_run(*spec.frozen_potential, spec.agent, spec.env, seed,
                                     loop.total_epochs());
    }
    return bilevel::run(loop, spec.agent, spec.env, seed);
  } catch (const std::exception& e) {
    bilevel::RunRecord failed;
    failed.seed = seed;
    failed.model = std::string(model_name(spec.model));
    failed.error = e.what();
    return failed;
  }
}

std::string threshold_label(double t) {
  std::ostringstream os;
  if (t > 0) os << '+';
  os << t;
  return os.str();
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

}  // namespace

std::vector<bilevel::RunRecord> run_seeds(const StudySpec& spec) {
  spec.validate();
  const std::size_t n = spec.seeds.size();
  std::vector<bilevel::RunRecord> records(n);
  std::size_t jobs = spec.jobs > 0 ? static_cast<std::size_t>(spec.jobs)
                                   : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, n);

  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      records[i] = run_one(spec, spec.seeds[i]);
      if (spec.on_run_done) {
        std::lock_guard lock(callback_mutex);
        spec.on_run_done(records[i]);
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  return records;
}

StudyReport build_report(Model model, std::vector<bilevel::RunRecord> records,
                         const ConvergenceCriteria& criteria, int trim) {
  StudyReport report;
  report.model = model;
  report.records = std::move(records);
  std::vector<estimator::EstimatorParams> finals;
  for (auto& rec : report.records) {
    RunMetrics m;
    m.seed = rec.seed;
    if (!rec.rewards.empty()) {
      m = compute_metrics(rec.seed, rec.rewards, criteria);
      rec.converged = m.converged;
      rec.convergence_epoch = m.convergence_epoch;
    } else {
      rec.converged = false;
      rec.convergence_epoch.reset();
    }
    if (m.converged) {
      ++report.converged;
      if (!rec.snapshots.empty() && !rec.error) finals.push_back(rec.snapshots.back());
    }
    report.metrics.push_back(std::move(m));
  }

  for (std::size_t k = 0; k < kRewardThresholds.size(); ++k) {
    ThresholdSummary& row = report.table[k];
    row.threshold = kRewardThresholds[k];
    row.runs = static_cast<int>(report.metrics.size());
    std::vector<double> reached;
    for (const auto& m : report.metrics) {
      if (m.epochs_to_threshold[k]) reached.push_back(*m.epochs_to_threshold[k]);
    }
    row.reached = static_cast<int>(reached.size());
    if (reached.size() > 2 * static_cast<std::size_t>(trim)) row.trimmed_mean = trimmed_mean(reached, trim);
  }

  if ((model == Model::LinearVrail || model == Model::QuadraticVrail) && !finals.empty()) {
    report.attribution = estimator::attribution_report(finals);
  }
  return report;
}

StudyReport run_study(const StudySpec& spec) {
  return build_report(spec.model, run_seeds(spec), spec.criteria);
}

void write_table1(std::ostream& out, std::span<const StudyReport> reports) {
  out << "model,threshold,trimmed_mean,runs_reached,runs_total\n";
  const auto old_precision = out.precision(10);
  for (const auto& r : reports) {
    for (const auto& row : r.table) {
      out << model_name(r.model) << ',' << threshold_label(row.threshold) << ',';
      if (row.trimmed_mean) out << *row.trimmed_mean;
      out << ',' << row.reached << ',' << row.runs << '\n';
    }
  }
  out.precision(old_precision);
}

nlohmann::json metrics_json(const StudyReport& report) {
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < report.metrics.size(); ++i) {
    const RunMetrics& m = report.metrics[i];
    const bilevel::RunRecord& rec = report.records[i];
    nlohmann::json thresholds = nlohmann::json::object();
    for (std::size_t k = 0; k < kRewardThresholds.size(); ++k) {
      thresholds[threshold_label(kRewardThresholds[k])] =
          m.epochs_to_threshold[k] ? nlohmann::json(*m.epochs_to_threshold[k]) : nlohmann::json(nullptr);
    }
    runs.push_back({{"seed", m.seed},
                    {"converged", m.converged},
                    {"convergence_epoch", m.convergence_epoch ? nlohmann::json(*m.convergence_epoch)
                                                              : nlohmann::json(nullptr)},
                    {"final_moving_avg",
                     m.moving_avg.empty() ? nlohmann::json(nullptr) : nlohmann::json(m.moving_avg.back())},
                    {"epochs_to_threshold", thresholds},
                    {"error", rec.error ? nlohmann::json(*rec.error) : nlohmann::json(nullptr)}});
  }
  nlohmann::json table = nlohmann::json::array();
  for (const auto& row : report.table) {
    table.push_back({{"threshold", row.threshold},
                     {"trimmed_mean", row.trimmed_mean ? nlohmann::json(*row.trimmed_mean)
                                                       : nlohmann::json(nullptr)},
                     {"runs_reached", row.reached},
                     {"runs_excluded", row.runs - row.reached}});
  }
  return {{"model", model_name(report.model)},
          {"tally", report.tally()},
          {"converged", report.converged},
          {"runs", runs},
          {"table1", table}};
}

void write_report(const StudyReport& report, const fs::path& out_dir, const taxi::EnvConfig& env) {
  fs::create_directories(out_dir);
  std::ostringstream episodes;
  episodes.precision(17);
  episodes << "seed,epoch,reward,epsilon,converged_flag\n";
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const bilevel::RunRecord& rec = report.records[i];
    const RunMetrics& m = report.metrics[i];
    write_file(out_dir / ("run_" + std::to_string(rec.seed) + ".json"), bilevel::to_json(rec).dump());

    std::ostringstream curve;
    curve.precision(10);
    curve << "seed,epoch,reward,moving_avg\n";
    for (std::size_t e = 0; e < rec.rewards.size(); ++e) {
      curve << rec.seed << ',' << e << ',' << rec.rewards[e] << ',' << m.moving_avg[e] << '\n';
      const bool flag = m.converged && m.convergence_epoch && static_cast<int>(e) >= *m.convergence_epoch;
      episodes << rec.seed << ',' << e << ',' << rec.rewards[e] << ',' << rec.epsilons[e] << ','
               << (flag ? 1 : 0) << '\n';
    }
    write_file(out_dir / ("curves_" + std::to_string(rec.seed) + ".csv"), curve.str());
  }
  write_file(out_dir / "episodes.csv", episodes.str());
  write_file(out_dir / "metrics.json", metrics_json(report).dump(2) + "\n");

  std::ostringstream table;
  write_table1(table, std::span<const StudyReport>(&report, 1));
  write_file(out_dir / "table1.csv", table.str());

  if (report.attribution) {
    std::ostringstream attribution;
    estimator::write_attribution_csv(attribution, *report.attribution, taxi::feature_names(env));
    const std::string name = report.attribution->mean.kind == estimator::Kind::Linear
                                 ? "attribution_linear.csv"
                                 : "attribution_quadratic.csv";
    write_file(out_dir / name, attribution.str());
  }
}

std::vector<bilevel::RunRecord> load_run_records(const fs::path& dir) {
  std::vector<bilevel::RunRecord> records;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || !name.starts_with("run_") || !name.ends_with(".json")) continue;
    std::ifstream in(entry.path());
    records.push_back(bilevel::run_record_from_json(nlohmann::json::parse(in)));
  }
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.seed < b.seed; });
  return records;
}

const bilevel::RunRecord* select_transfer_source(const StudyReport& report) {
  const bilevel::RunRecord* best = nullptr;
  double best_ma = 0.0;
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const auto& rec = report.records[i];
    const auto& m = report.metrics[i];
    if (!m.converged || rec.snapshots.empty() || rec.error) continue;
    if (!best || m.moving_avg.back() > best_ma) {
      best = &rec;
      best_ma = m.moving_avg.back();
    }
  }
  return best;
}

TransferStudy run_transfer_study(const StudySpec& base, const estimator::EstimatorParams& potential) {
  StudySpec baseline_spec = base;
  baseline_spec.model = Model::Dqn;
  StudySpec transfer_spec = base;
  transfer_spec.model = Model::DqnFrozen;
  transfer_spec.frozen_potential = potential;
  TransferStudy study{potential, run_study(baseline_spec), run_study(transfer_spec)};
  return study;
}

}  // namespace vrail::harness
