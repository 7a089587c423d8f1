#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsda/data/dataset.hpp"

namespace wsda::metrics {

/// Pearson correlation. Throws UndefinedMetricError when either input is constant.
double pcc(std::span<const double> x, std::span<const double> y);

double mae(std::span<const double> x, std::span<const double> y);

/// Shrout-Fleiss ICC(3,1), consistency, for n targets rated by two raters:
/// (BMS - EMS) / (BMS + EMS) from the two-way ANOVA table.
double icc31(std::span<const double> rater1, std::span<const double> rater2);

/// Predicted values for one window, spread evenly over its frames
/// (T' timestep values from the label head, or one value from the weak head).
using WindowValues = std::vector<double>;
using BagPrediction = std::vector<WindowValues>;
/// Indexed like dataset.bags[i].instances[j].
using Predictions = std::vector<BagPrediction>;

struct MetricSet {
  std::optional<double> pcc;  // empty when undefined (constant input)
  double mae = 0.0;
  std::optional<double> icc;
};

struct EvalReport {
  MetricSet frame;
  MetricSet sequence;
  std::size_t frames = 0;
  std::size_t sequences = 0;
};

enum class EvalMode { frame, sequence };

struct FrameTrace {
  std::string sequence;
  std::size_t frame = 0;
  double truth = 0.0;
  double prediction = 0.0;
};

/// Per-frame predictions: each window value covers its share of the window's
/// frames and overlapping windows are averaged. Frames no window covers are skipped.
std::vector<FrameTrace> frame_traces(const Predictions& predictions, const data::Dataset& dataset);

/// Per-bag (prediction, truth): max over windows of the window mean, against Y.
std::vector<std::pair<double, double>> sequence_pairs(const Predictions& predictions,
                                                      const data::Dataset& dataset);

MetricSet evaluate(const Predictions& predictions, const data::Dataset& dataset, EvalMode mode);
EvalReport evaluate_report(const Predictions& predictions, const data::Dataset& dataset);

}  // namespace wsda::metrics
