// Command-line front end: train, study, transfer, analyze, dump-env, validate.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "vrail/config.hpp"
#include "vrail/selfcheck.hpp"
#include "vrail/study.hpp"

namespace fs = std::filesystem;
using namespace vrail;

namespace {

struct ConfigOptions {
  std::string file;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", file, "Config file (JSON object or key = value lines)")->check(CLI::ExistingFile);
    app->add_option("-s,--set", overrides, "Override a config key, KEY=VALUE (repeatable)");
  }

  config::ExperimentConfig resolve() const {
    config::ExperimentConfig cfg;
    if (!file.empty()) config::load_file(cfg, file);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects KEY=VALUE, got '" + kv + "'");
      config::apply(cfg, std::string_view(kv).substr(0, eq), std::string_view(kv).substr(eq + 1));
    }
    cfg.env.validate();
    cfg.agent.validate();
    cfg.loop.validate();
    return cfg;
  }
};

std::vector<std::uint64_t> seed_range(std::uint64_t start, int count) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(start + static_cast<std::uint64_t>(i));
  return seeds;
}

estimator::EstimatorParams read_potential(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open potential file " + path.string());
  return estimator::params_from_json(nlohmann::json::parse(in));
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_config(const fs::path& dir, const config::ExperimentConfig& cfg) {
  write_json(dir / "config.json", config::to_json(cfg));
}

std::string format_run(const bilevel::RunRecord& rec) {
  std::ostringstream os;
  os << rec.model << " seed " << rec.seed << ": ";
  if (rec.error) {
    os << "error (" << *rec.error << ")";
    return os.str();
  }
  const auto ma = harness::moving_average(rec.rewards);
  os << (rec.converged ? "converged" : "not converged") << ", final moving average " << std::fixed
     << std::setprecision(2) << ma.back();
  return os.str();
}

void print_summary(const harness::StudyReport& report) {
  std::cout << harness::model_name(report.model) << ": converged " << report.tally() << '\n';
  for (const auto& row : report.table) {
    std::ostringstream line;
    line << "  threshold " << std::showpos << row.threshold << std::noshowpos << ": ";
    if (row.trimmed_mean) {
      line << std::fixed << std::setprecision(2) << *row.trimmed_mean << " epochs";
    } else {
      line << "n/a";
    }
    std::cout << line.str() << " (" << row.reached << "/" << row.runs << " reached)\n";
  }
}

void print_attribution(const estimator::AttributionReport& report, const taxi::EnvConfig& env, int top) {
  const auto names = taxi::feature_names(env);
  std::vector<std::pair<std::string, double>> rows;
  if (report.mean.kind == estimator::Kind::Linear) {
    for (const auto& fw : report.ranking) rows.emplace_back(names[fw.feature], fw.weight);
  } else {
    // Upper triangle of the symmetrized matrix, largest first.
    const std::size_t d = report.mean.dim;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) rows.emplace_back(names[i] + " x " + names[j], report.symmetric[i * d + j]);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  }
  std::cout << "  top features over " << report.sample_count << " converged runs:\n";
  const std::size_t n = std::min(static_cast<std::size_t>(top), rows.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::cout << "    " << std::setw(28) << std::left << rows[i].first << std::right << std::fixed
              << std::setprecision(4) << rows[i].second << '\n';
  }
}

harness::StudySpec make_spec(const config::ExperimentConfig& cfg, harness::Model model,
                             std::vector<std::uint64_t> seeds, int jobs, bool verbose) {
  harness::StudySpec spec;
  spec.model = model;
  spec.seeds = std::move(seeds);
  spec.env = cfg.env;
  spec.agent = cfg.agent;
  spec.loop = cfg.loop;
  spec.jobs = jobs;
  if (verbose) spec.on_run_done = [](const bilevel::RunRecord& r) { std::cerr << format_run(r) << '\n'; };
  return spec;
}

int cmd_train(const ConfigOptions& opts, const std::string& model_text, std::uint64_t seed, const fs::path& out_dir,
              const std::string& potential_file) {
  config::ExperimentConfig cfg = opts.resolve();
  const harness::Model model = harness::model_from_name(model_text);
  harness::StudySpec spec = make_spec(cfg, model, {seed}, 1, false);
  if (!potential_file.empty()) {
    if (model != harness::Model::Dqn && model != harness::Model::DqnFrozen) {
      throw std::invalid_argument("--potential only applies to the dqn model");
    }
    spec.model = harness::Model::DqnFrozen;
    spec.frozen_potential = read_potential(potential_file);
  }
  spec.validate();

  bilevel::RunRecord record;
  std::vector<double> window;
  auto progress = [&](int epoch, const dqn::EpisodeStats& s) {
    window.push_back(s.reward);
    if ((epoch + 1) % 100 == 0) {
      double sum = 0.0;
      for (std::size_t i = window.size() >= 100 ? window.size() - 100 : 0; i < window.size(); ++i) sum += window[i];
      std::cerr << "epoch " << epoch + 1 << "  moving avg " << std::fixed << std::setprecision(2)
                << sum / std::min<double>(100.0, static_cast<double>(window.size())) << "  epsilon "
                << std::setprecision(3) << s.epsilon << '\n';
    }
  };
  if (spec.model == harness::Model::DqnFrozen) {
    record = bilevel::transfer_run(*spec.frozen_potential, spec.agent, spec.env, seed, spec.loop.total_epochs(),
                                   progress);
  } else {
    bilevel::LoopConfig loop = spec.loop;
    loop.estimator = model == harness::Model::LinearVrail      ? bilevel::EstimatorChoice::Linear
                     : model == harness::Model::QuadraticVrail ? bilevel::EstimatorChoice::Quadratic
                                                               : bilevel::EstimatorChoice::None;
    record = bilevel::run(loop, spec.agent, spec.env, seed, progress);
  }
  const harness::StudyReport report = harness::build_report(spec.model, {record}, spec.criteria);
  harness::write_report(report, out_dir, spec.env);
  write_config(out_dir, cfg);
  std::cout << format_run(report.records.front()) << '\n';
  if (!report.records.front().snapshots.empty()) {
    write_json(out_dir / ("params_" + std::to_string(seed) + ".json"),
               estimator::to_json(report.records.front().snapshots.back()));
  }
  return report.records.front().error ? 1 : 0;
}

int cmd_study(const ConfigOptions& opts, std::vector<std::string> models, std::uint64_t seed_start, int seeds,
              int jobs, const fs::path& out_dir) {
  const config::ExperimentConfig cfg = opts.resolve();
  if (models.empty()) models = {"dqn", "linear", "quadratic"};
  std::vector<harness::StudyReport> reports;
  for (const auto& name : models) {
    const harness::Model model = harness::model_from_name(name);
    if (model == harness::Model::DqnFrozen) throw std::invalid_argument("use the transfer command for dqn+frozen");
    harness::StudyReport report = harness::run_study(make_spec(cfg, model, seed_range(seed_start, seeds), jobs, true));
    harness::write_report(report, out_dir / name, cfg.env);
    print_summary(report);
    if (report.attribution) print_attribution(*report.attribution, cfg.env, 5);
    reports.push_back(std::move(report));
  }
  std::ofstream table(out_dir / "table1.csv");
  harness::write_table1(table, reports);
  write_config(out_dir, cfg);
  return 0;
}

int cmd_transfer(const ConfigOptions& opts, const fs::path& source_dir, const std::string& potential_file,
                 std::uint64_t seed_start, int seeds, int jobs, const fs::path& out_dir) {
  const config::ExperimentConfig cfg = opts.resolve();
  estimator::EstimatorParams potential;
  if (!potential_file.empty()) {
    potential = read_potential(potential_file);
  } else {
    const harness::StudyReport source =
        harness::build_report(harness::Model::LinearVrail, harness::load_run_records(source_dir));
    const bilevel::RunRecord* best = harness::select_transfer_source(source);
    if (!best) throw std::runtime_error("no converged run with estimator snapshots in " + source_dir.string());
    std::cerr << "pretrained potential from " << best->model << " seed " << best->seed << '\n';
    potential = best->snapshots.back();
  }
  const harness::StudySpec base = make_spec(cfg, harness::Model::Dqn, seed_range(seed_start, seeds), jobs, true);
  const harness::TransferStudy study = harness::run_transfer_study(base, potential);
  write_json(out_dir / "potential.json", estimator::to_json(potential));
  harness::write_report(study.baseline, out_dir / "dqn", cfg.env);
  harness::write_report(study.transfer, out_dir / "dqn+frozen", cfg.env);
  const std::array<harness::StudyReport, 2> both{study.baseline, study.transfer};
  std::ofstream table(out_dir / "table1.csv");
  harness::write_table1(table, both);
  write_config(out_dir, cfg);
  print_summary(study.baseline);
  print_summary(study.transfer);
  return 0;
}

int cmd_analyze(const std::vector<fs::path>& dirs, const ConfigOptions& opts, int top) {
  const config::ExperimentConfig cfg = opts.resolve();
  std::vector<harness::StudyReport> reports;
  for (const auto& dir : dirs) {
    auto records = harness::load_run_records(dir);
    if (records.empty()) throw std::runtime_error("no run_<seed>.json files in " + dir.string());
    const harness::Model model = harness::model_from_name(records.front().model);
    harness::StudyReport report = harness::build_report(model, std::move(records));
    harness::write_report(report, dir, cfg.env);
    std::cout << dir.string() << '\n';
    print_summary(report);
    if (report.attribution) print_attribution(*report.attribution, cfg.env, top);
    reports.push_back(std::move(report));
  }
  if (dirs.size() > 1) {
    const fs::path combined = dirs.front().parent_path() / "table1.csv";
    std::ofstream table(combined);
    harness::write_table1(table, reports);
  }
  return 0;
}

int cmd_dump_env(bool sparse, const std::string& out_file) {
  taxi::EnvConfig cfg;
  cfg.sparse_rewards = sparse;
  if (out_file.empty() || out_file == "-") {
    taxi::dump_transitions(std::cout, cfg);
  } else {
    std::ofstream out(out_file);
    if (!out) throw std::runtime_error("cannot write " + out_file);
    taxi::dump_transitions(out, cfg);
  }
  return 0;
}

int cmd_validate(const ConfigOptions& opts) {
  if (!opts.file.empty() || !opts.overrides.empty()) {
    std::cout << config::to_json(opts.resolve()).dump(2) << '\n';
  }
  bool ok = true;
  for (const auto& r : selfcheck::run_all()) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << std::fixed << std::setprecision(3) << r.seconds
              << " s): " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bi-level value-estimator reward shaping on the Taxi gridworld"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Train one model for one seed");
  ConfigOptions train_cfg;
  train_cfg.attach(train);
  std::string train_model, train_potential;
  std::uint64_t train_seed = 0;
  std::string train_out;
  train->add_option("-m,--model", train_model, "dqn, linear or quadratic")->required();
  train->add_option("--seed", train_seed, "Run seed")->required();
  train->add_option("-o,--out-dir", train_out, "Output directory")->required();
  train->add_option("--potential", train_potential, "Frozen potential JSON (dqn only)")->check(CLI::ExistingFile);

  auto* study = app.add_subcommand("study", "Multi-seed study of one or more models");
  ConfigOptions study_cfg;
  study_cfg.attach(study);
  std::vector<std::string> study_models;
  std::uint64_t study_seed_start = 0;
  int study_seeds = 10, study_jobs = 0;
  std::string study_out;
  study->add_option("-m,--model", study_models, "Models to run (default: dqn linear quadratic)");
  study->add_option("--seed-start", study_seed_start, "First seed");
  study->add_option("-n,--seeds", study_seeds, "Number of seeds")->check(CLI::PositiveNumber);
  study->add_option("-j,--jobs", study_jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  study->add_option("-o,--out-dir", study_out, "Output directory")->required();

  auto* transfer = app.add_subcommand("transfer", "DQN with a frozen pretrained potential vs. baseline DQN");
  ConfigOptions transfer_cfg;
  transfer_cfg.attach(transfer);
  std::string transfer_source, transfer_potential, transfer_out;
  std::uint64_t transfer_seed_start = 0;
  int transfer_seeds = 5, transfer_jobs = 0;
  auto* source_opt = transfer->add_option("--source", transfer_source, "Linear study directory to pretrain from")
                         ->check(CLI::ExistingDirectory);
  auto* potential_opt =
      transfer->add_option("--potential", transfer_potential, "Potential JSON file")->check(CLI::ExistingFile);
  source_opt->excludes(potential_opt);
  transfer->add_option("--seed-start", transfer_seed_start, "First seed");
  transfer->add_option("-n,--seeds", transfer_seeds, "Number of seeds")->check(CLI::PositiveNumber);
  transfer->add_option("-j,--jobs", transfer_jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  transfer->add_option("-o,--out-dir", transfer_out, "Output directory")->required();

  auto* analyze = app.add_subcommand("analyze", "Rebuild metrics and attribution reports from stored runs");
  ConfigOptions analyze_cfg;
  analyze_cfg.attach(analyze);
  std::vector<std::string> analyze_dirs;
  int analyze_top = 10;
  analyze->add_option("dirs", analyze_dirs, "Directories containing run_<seed>.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  analyze->add_option("--top", analyze_top, "Features to print")->check(CLI::NonNegativeNumber);

  auto* dump = app.add_subcommand("dump-env", "Print the full transition table as CSV");
  bool dump_sparse = false;
  std::string dump_out;
  dump->add_flag("--sparse", dump_sparse, "Zero step reward");
  dump->add_option("-o,--out", dump_out, "Output file (default stdout)");

  auto* validate = app.add_subcommand("validate", "Run the oracle and invariant checks; optionally check a config");
  ConfigOptions validate_cfg;
  validate_cfg.attach(validate);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_cfg, train_model, train_seed, train_out, train_potential);
    if (*study) return cmd_study(study_cfg, study_models, study_seed_start, study_seeds, study_jobs, study_out);
    if (*transfer) {
      if (transfer_source.empty() && transfer_potential.empty()) {
        throw std::invalid_argument("transfer needs --source or --potential");
      }
      return cmd_transfer(transfer_cfg, transfer_source, transfer_potential, transfer_seed_start, transfer_seeds,
                          transfer_jobs, transfer_out);
    }
    if (*analyze) {
      std::vector<fs::path> dirs(analyze_dirs.begin(), analyze_dirs.end());
      return cmd_analyze(dirs, analyze_cfg, analyze_top);
    }
    if (*dump) return cmd_dump_env(dump_sparse, dump_out);
    if (*validate) return cmd_validate(validate_cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
