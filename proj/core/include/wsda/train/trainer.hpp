#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wsda/data/dataset.hpp"
#include "wsda/metrics/metrics.hpp"
#include "wsda/net/model.hpp"
#include "wsda/objective/objective.hpp"
#include "wsda/train/scenario.hpp"

namespace wsda::train {

struct EpochRecord {
  objective::LossReport losses;
  std::optional<double> validation_pcc;
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

struct TrainResult {
  net::ModelParams params;  // best-validation parameters
  RunHistory history;
};

/// Trains the four-part network under `scenario`. `validation` (target bags
/// scored against hidden intensities) drives early stopping; without it the
/// final epoch is kept.
TrainResult train(const Scenario& scenario, const data::Dataset& source,
                  const data::Dataset& target, const data::Dataset* validation,
                  const net::ModelConfig& model, const objective::TrainingConfig& training);

/// train() with the weakly-supervised adversarial scenario.
TrainResult train_wsda(const data::Dataset& source, const data::Dataset& target,
                       const net::ModelConfig& model, const objective::TrainingConfig& training,
                       const data::Dataset* validation = nullptr);

/// Window-level outputs of one head for every instance of `dataset`.
metrics::Predictions predict(const net::ModelParams& params, const net::ModelConfig& model,
                             const data::Dataset& dataset, Head head);

/// Fraction of windows whose domain logit has the sign of their true domain.
double domain_accuracy(const net::ModelParams& params, const net::ModelConfig& model,
                       const data::Dataset& source, const data::Dataset& target);

struct ExperimentConfig {
  net::ModelConfig model;
  objective::TrainingConfig training;
  /// Target annotation period in frames for weak labels; 0 keeps whole sequences.
  std::size_t bag_length = 0;
  /// Held-out target subject; empty picks the first target subject.
  std::string test_subject;
  /// Run every target subject as a fold and pool the test frames.
  bool full_loso = false;
};

struct ScenarioResult {
  Scenario scenario;
  metrics::EvalReport report;
  std::vector<metrics::FrameTrace> traces;
  TrainResult run;  // last fold when full_loso
};

/// Trains per the scenario's flags on one LOSO fold (or all folds) of the
/// target data and evaluates on the held-out target subject(s).
ScenarioResult run_scenario(const Scenario& scenario, const data::Dataset& source,
                            const data::Dataset& target, const ExperimentConfig& config);

struct SweepRow {
  std::size_t bag_length = 0;
  std::optional<double> frame_pcc;
  metrics::EvalReport report;
};

std::vector<SweepRow> annotation_sweep(const data::Dataset& source, const data::Dataset& target,
                                       const std::vector<std::size_t>& bag_lengths,
                                       const ExperimentConfig& config);

// -- report emission ----------------------------------------------------------

std::string metrics_json(const std::string& scenario, std::uint64_t seed,
                         const metrics::EvalReport& report);
std::string loss_csv(const RunHistory& history);
std::string trace_csv(const std::vector<metrics::FrameTrace>& traces);

struct ReportPaths {
  std::filesystem::path metrics, losses, traces;
};

/// Writes metrics.json, losses.csv and trace.csv into `dir`.
ReportPaths emit_report(const std::filesystem::path& dir, const std::string& scenario,
                        std::uint64_t seed, const RunHistory& history,
                        const metrics::EvalReport& report,
                        const std::vector<metrics::FrameTrace>& traces);

}  // namespace wsda::train
