#include "cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cli/gradcheck_suite.hpp"
#include "wsda/error.hpp"
#include "wsda/net/checkpoint.hpp"

namespace wsda::cli {
namespace fs = std::filesystem;

namespace {

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell(const std::optional<double>& v) { return v ? real(*v) : ""; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

train::ExperimentConfig experiment(const RunConfig& config) {
  train::ExperimentConfig e;
  e.model = config.model;
  e.training = config.training;
  e.bag_length = config.bag_length;
  e.test_subject = config.test_subject;
  e.full_loso = config.full_loso;
  return e;
}

const char* kMetricHeader = "frame_pcc,frame_mae,frame_icc,sequence_pcc,sequence_mae,sequence_icc";

std::string metric_cells(const metrics::EvalReport& r) {
  return cell(r.frame.pcc) + "," + real(r.frame.mae) + "," + cell(r.frame.icc) + "," +
         cell(r.sequence.pcc) + "," + real(r.sequence.mae) + "," + cell(r.sequence.icc);
}

// Column-wise medians over seeds; undefined entries are left out.
std::string median_cells(const std::vector<metrics::EvalReport>& reports) {
  using Get = std::optional<double> (*)(const metrics::EvalReport&);
  const Get columns[] = {
      [](const metrics::EvalReport& r) { return r.frame.pcc; },
      [](const metrics::EvalReport& r) { return std::optional<double>(r.frame.mae); },
      [](const metrics::EvalReport& r) { return r.frame.icc; },
      [](const metrics::EvalReport& r) { return r.sequence.pcc; },
      [](const metrics::EvalReport& r) { return std::optional<double>(r.sequence.mae); },
      [](const metrics::EvalReport& r) { return r.sequence.icc; },
  };
  std::string out;
  for (std::size_t c = 0; c < std::size(columns); ++c) {
    std::vector<double> values;
    for (const auto& r : reports)
      if (auto v = columns[c](r)) values.push_back(*v);
    out += (c ? "," : "") + cell(median(values));
  }
  return out;
}

}  // namespace

fs::path write_manifest(const RunConfig& config, const std::string& command,
                        const std::vector<fs::path>& outputs) {
  ensure_dir(config.out);
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config.hash()));
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config_hash"] = hash;
  j["seed"] = config.seed;
  nlohmann::ordered_json keys = nlohmann::ordered_json::object();
  std::istringstream lines(config.canonical());
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find(" = ");
    keys[line.substr(0, eq)] = line.substr(eq + 3);
  }
  j["config"] = keys;
  auto files = nlohmann::json::array();
  for (const auto& p : outputs) files.push_back(p.lexically_relative(config.out).generic_string());
  j["outputs"] = files;
  const fs::path path = config.out / "manifest.json";
  write_text(path, j.dump(2) + "\n");
  return path;
}

data::DomainPair load_or_generate(const RunConfig& config) {
  if (!config.data_dir) return data::synth_generate(config.gen);
  return {data::dataset_read(*config.data_dir / "source.wsds"),
          data::dataset_read(*config.data_dir / "target.wsds")};
}

std::vector<fs::path> cmd_gen(const RunConfig& config) {
  ensure_dir(config.out);
  const auto pair = data::synth_generate(config.gen);
  const std::vector<fs::path> files{config.out / "source.wsds", config.out / "target.wsds"};
  data::dataset_write(pair.source, files[0]);
  data::dataset_write(pair.target, files[1]);
  write_manifest(config, "gen", files);
  return files;
}

TrainOutputs cmd_train(const RunConfig& config) {
  ensure_dir(config.out);
  const auto pair = load_or_generate(config);
  const auto scenario = train::Scenario::parse(config.scenario);
  TrainOutputs out;
  out.result = train::run_scenario(scenario, pair.source, pair.target, experiment(config));
  out.checkpoint = config.out / "checkpoint.wsda";
  net::save_params(out.checkpoint, out.result.run.params);
  out.reports = train::emit_report(config.out, scenario.name(), config.seed, out.result.run.history,
                                   out.result.report, out.result.traces);
  write_manifest(config, "train",
                 {out.checkpoint, out.reports.metrics, out.reports.losses, out.reports.traces});
  return out;
}

metrics::EvalReport cmd_eval(const RunConfig& config, const fs::path& checkpoint,
                             const fs::path& dataset, train::Head head) {
  ensure_dir(config.out);
  const auto params = net::load_params(checkpoint, config.model);
  const auto data = data::dataset_read(dataset);
  const auto preds = train::predict(params, config.model, data, head);
  const auto report = metrics::evaluate_report(preds, data);
  const fs::path path = config.out / "eval.json";
  write_text(path, train::metrics_json(head == train::Head::label ? "eval_label_head" : "eval_weak_head",
                                       config.seed, report));
  write_manifest(config, "eval", {path});
  return report;
}

std::string cmd_scenarios(const RunConfig& config) {
  ensure_dir(config.out);
  std::map<std::string, std::vector<metrics::EvalReport>> by_scenario;
  std::string csv = std::string("scenario,seed,") + kMetricHeader + "\n";
  for (const std::uint64_t seed : config.run_seeds()) {
    const RunConfig run = config.with_seed(seed);
    const auto pair = load_or_generate(run);
    for (const auto& name : config.scenario_list) {
      const auto result = train::run_scenario(train::Scenario::parse(name), pair.source,
                                              pair.target, experiment(run));
      csv += name + "," + std::to_string(seed) + "," + metric_cells(result.report) + "\n";
      by_scenario[name].push_back(result.report);
    }
  }
  for (const auto& name : config.scenario_list)
    csv += name + ",median," + median_cells(by_scenario[name]) + "\n";
  const fs::path path = config.out / "scenarios.csv";
  write_text(path, csv);
  write_manifest(config, "scenarios", {path});
  return csv;
}

std::string cmd_sweep(const RunConfig& config) {
  ensure_dir(config.out);
  std::map<std::size_t, std::vector<metrics::EvalReport>> by_length;
  std::string csv = std::string("bag_length,seed,") + kMetricHeader + "\n";
  for (const std::uint64_t seed : config.run_seeds()) {
    const RunConfig run = config.with_seed(seed);
    const auto pair = load_or_generate(run);
    for (const auto& row :
         train::annotation_sweep(pair.source, pair.target, config.sweep_lengths, experiment(run))) {
      csv += std::to_string(row.bag_length) + "," + std::to_string(seed) + "," +
             metric_cells(row.report) + "\n";
      by_length[row.bag_length].push_back(row.report);
    }
  }
  for (const std::size_t length : config.sweep_lengths)
    csv += std::to_string(length) + ",median," + median_cells(by_length[length]) + "\n";
  const fs::path path = config.out / "sweep.csv";
  write_text(path, csv);
  write_manifest(config, "sweep", {path});
  return csv;
}

bool cmd_gradcheck(std::uint64_t seed, std::ostream& out) {
  const auto cases = gradcheck_suite(seed);
  bool ok = true;
  for (const auto& c : cases) {
    const bool pass = c.result.max_rel_error < kGradCheckTolerance;
    ok = ok && pass;
    out << std::left << std::setw(26) << c.name << " max_rel_error " << std::scientific
        << std::setprecision(3) << c.result.max_rel_error << " coords " << std::defaultfloat
        << c.result.coordinates << (pass ? "" : "  FAIL") << "\n";
  }
  out << "seed " << seed << " max relative error " << std::scientific << std::setprecision(3)
      << worst_error(cases) << std::defaultfloat << (ok ? " PASS" : " FAIL") << "\n";
  return ok;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"wsda: weakly-supervised adversarial domain adaptation on synthetic video bags"};
  app.require_subcommand(1);

  fs::path config_path;
  std::vector<std::string> sets;
  std::vector<std::string> key_flags;
  auto add_config_options = [&](CLI::App* sub) {
    // presence is checked after parsing so that an unknown flag is reported first
    sub->add_option("-c,--config", config_path, "run configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override a key, e.g. --set train.lr=0.01 (repeatable)");
    for (const auto& key : config_keys()) {
      sub->add_option_function<std::string>(
             "--" + key, [&key_flags, key](const std::string& v) { key_flags.push_back(key + "=" + v); },
             "override " + key)
          ->group("Config keys");
    }
  };

  auto* gen = app.add_subcommand("gen", "generate the source and target datasets");
  auto* trn = app.add_subcommand("train", "train one scenario and write checkpoint and reports");
  auto* evl = app.add_subcommand("eval", "score a checkpoint on a dataset");
  auto* scn = app.add_subcommand("scenarios", "scenario comparison table over seeds");
  auto* swp = app.add_subcommand("sweep", "annotation-frequency sweep over seeds");
  auto* grd = app.add_subcommand("gradcheck", "finite-difference check of every op and the full loss graph");
  for (auto* sub : {gen, trn, evl, scn, swp}) add_config_options(sub);

  fs::path checkpoint, dataset;
  std::string head_name = "label";
  evl->add_option("--checkpoint", checkpoint, "parameter checkpoint")->required()->check(CLI::ExistingFile);
  evl->add_option("--dataset", dataset, "dataset file")->required()->check(CLI::ExistingFile);
  evl->add_option("--head", head_name, "prediction head")->check(CLI::IsMember({"label", "weak"}));

  std::uint64_t grad_seed = 1;
  grd->add_option("--seed", grad_seed, "seed for the check points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (grd->parsed()) return cmd_gradcheck(grad_seed, out) ? 0 : 1;

    if (config_path.empty()) {
      err << "missing required option --config\n";
      return 2;
    }
    std::vector<std::string> overrides = key_flags;
    overrides.insert(overrides.end(), sets.begin(), sets.end());
    const RunConfig config = load_config(config_path, overrides);

    if (gen->parsed()) {
      for (const auto& f : cmd_gen(config)) out << f.string() << "\n";
    } else if (trn->parsed()) {
      const auto result = cmd_train(config);
      out << train::metrics_json(config.scenario, config.seed, result.result.report);
    } else if (evl->parsed()) {
      const auto head = head_name == "weak" ? train::Head::weak : train::Head::label;
      const auto report = cmd_eval(config, checkpoint, dataset, head);
      out << train::metrics_json("eval", config.seed, report);
    } else if (scn->parsed()) {
      out << cmd_scenarios(config);
    } else if (swp->parsed()) {
      out << cmd_sweep(config);
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingError& e) {
    err << "training error at epoch " << e.epoch() << ": " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace wsda::cli
