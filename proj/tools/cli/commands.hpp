#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "wsda/data/dataset.hpp"
#include "wsda/metrics/metrics.hpp"
#include "wsda/train/scenario.hpp"
#include "wsda/train/trainer.hpp"

namespace wsda::cli {

/// Every command writes its artifacts under config.out plus a manifest.json
/// naming the command, the config hash, the seed and the emitted files.
std::filesystem::path write_manifest(const RunConfig& config, const std::string& command,
                                     const std::vector<std::filesystem::path>& outputs);

/// Source and target data: read from data.dir when set, otherwise generated.
data::DomainPair load_or_generate(const RunConfig& config);

/// source.wsds and target.wsds.
std::vector<std::filesystem::path> cmd_gen(const RunConfig& config);

struct TrainOutputs {
  std::filesystem::path checkpoint;
  train::ReportPaths reports;
  train::ScenarioResult result;
};

/// Trains `config.scenario` and writes checkpoint.wsda, metrics.json,
/// losses.csv and trace.csv (last fold when fold.full_loso is set).
TrainOutputs cmd_train(const RunConfig& config);

/// Scores a checkpoint on a dataset; writes eval.json.
metrics::EvalReport cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint,
                             const std::filesystem::path& dataset, train::Head head);

/// One row per (scenario, seed) plus a median row per scenario; writes scenarios.csv.
std::string cmd_scenarios(const RunConfig& config);

/// One row per (bag length, seed) plus a median row per bag length; writes sweep.csv.
std::string cmd_sweep(const RunConfig& config);

/// Runs the gradient-check suite, prints one line per case and returns
/// whether every case is below the tolerance.
bool cmd_gradcheck(std::uint64_t seed, std::ostream& out);

/// Full command-line entry point; returns the process exit code
/// (0 success, 1 runtime or training failure, 2 usage or config error).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wsda::cli
