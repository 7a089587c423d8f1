#include "wsda/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "wsda/error.hpp"

namespace wsda::metrics {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y, std::size_t min_n,
                const char* who) {
  if (x.size() != y.size()) {
    throw DimensionError(std::string(who) + ": length mismatch " + std::to_string(x.size()) +
                         " vs " + std::to_string(y.size()));
  }
  if (x.size() < min_n) {
    throw DimensionError(std::string(who) + " needs at least " + std::to_string(min_n) +
                         " values");
  }
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

template <typename F>
std::optional<double> defined_or_empty(F&& f) {
  try {
    return f();
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

MetricSet score(const std::vector<double>& pred, const std::vector<double>& truth) {
  MetricSet m;
  m.mae = mae(pred, truth);
  if (pred.size() >= 2) m.pcc = defined_or_empty([&] { return pcc(pred, truth); });
  if (pred.size() >= 3) m.icc = defined_or_empty([&] { return icc31(truth, pred); });
  return m;
}

void check_coverage(const Predictions& predictions, const data::Dataset& dataset) {
  if (predictions.size() != dataset.bags.size()) {
    throw ProtocolError("predictions cover " + std::to_string(predictions.size()) + " of " +
                        std::to_string(dataset.bags.size()) + " bags");
  }
  for (std::size_t b = 0; b < predictions.size(); ++b) {
    const auto& bag = dataset.bags[b];
    if (predictions[b].size() != bag.instances.size()) {
      throw ProtocolError("bag '" + bag.id + "' has " + std::to_string(bag.instances.size()) +
                          " windows but " + std::to_string(predictions[b].size()) +
                          " predictions");
    }
    for (std::size_t i = 0; i < predictions[b].size(); ++i) {
      const auto& vals = predictions[b][i];
      if (vals.empty() || bag.instances[i].range.size() % vals.size() != 0) {
        throw ProtocolError("window " + std::to_string(i) + " of bag '" + bag.id +
                            "' has an unusable prediction length " + std::to_string(vals.size()));
      }
    }
  }
}

}  // namespace

double pcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2, "pcc");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedMetricError("pcc of a constant sequence");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double mae(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 1, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

double icc31(std::span<const double> rater1, std::span<const double> rater2) {
  check_pair(rater1, rater2, 3, "icc31");
  const std::size_t n = rater1.size();
  constexpr double k = 2.0;
  const double grand = (mean(rater1) + mean(rater2)) / 2.0;
  const double col1 = mean(rater1), col2 = mean(rater2);

  double ss_rows = 0.0, ss_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double row = (rater1[i] + rater2[i]) / 2.0;
    ss_rows += k * (row - grand) * (row - grand);
    ss_total += (rater1[i] - grand) * (rater1[i] - grand) + (rater2[i] - grand) * (rater2[i] - grand);
  }
  const double ss_cols =
      static_cast<double>(n) * ((col1 - grand) * (col1 - grand) + (col2 - grand) * (col2 - grand));
  const double ss_error = std::max(0.0, ss_total - ss_rows - ss_cols);

  const double bms = ss_rows / static_cast<double>(n - 1);
  const double ems = ss_error / (static_cast<double>(n - 1) * (k - 1.0));
  if (bms == 0.0) throw UndefinedMetricError("icc31 with zero between-target variance");
  const double denom = bms + (k - 1.0) * ems;
  return std::clamp((bms - ems) / denom, -1.0, 1.0);
}

std::vector<FrameTrace> frame_traces(const Predictions& predictions, const data::Dataset& dataset) {
  check_coverage(predictions, dataset);

  struct Acc {
    std::map<std::size_t, std::pair<double, std::size_t>> frames;  // frame -> (sum, count)
    std::map<std::size_t, double> truth;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> seqs;
  for (std::size_t b = 0; b < predictions.size(); ++b) {
    const auto& bag = dataset.bags[b];
    if (!seqs.count(bag.sequence)) order.push_back(bag.sequence);
    Acc& acc = seqs[bag.sequence];
    for (std::size_t f = 0; f < bag.hidden.size(); ++f) acc.truth[bag.first_frame + f] = bag.hidden[f];
    for (std::size_t i = 0; i < bag.instances.size(); ++i) {
      const auto& inst = bag.instances[i];
      const auto& vals = predictions[b][i];
      const std::size_t span = inst.range.size() / vals.size();
      for (std::size_t f = inst.range.start; f < inst.range.end; ++f) {
        auto& [sum, count] = acc.frames[f];
        sum += vals[(f - inst.range.start) / span];
        ++count;
      }
    }
  }

  std::vector<FrameTrace> out;
  for (const auto& seq : order) {
    const Acc& acc = seqs[seq];
    for (const auto& [frame, sc] : acc.frames) {
      auto t = acc.truth.find(frame);
      if (t == acc.truth.end()) continue;
      out.push_back({seq, frame, t->second, sc.first / static_cast<double>(sc.second)});
    }
  }
  return out;
}

std::vector<std::pair<double, double>> sequence_pairs(const Predictions& predictions,
                                                      const data::Dataset& dataset) {
  check_coverage(predictions, dataset);
  std::vector<std::pair<double, double>> out;
  for (std::size_t b = 0; b < predictions.size(); ++b) {
    double best = 0.0;
    for (std::size_t i = 0; i < predictions[b].size(); ++i) {
      const auto& vals = predictions[b][i];
      double s = 0.0;
      for (double v : vals) s += v;
      const double window = s / static_cast<double>(vals.size());
      if (i == 0 || window > best) best = window;
    }
    if (predictions[b].empty()) {
      throw ProtocolError("bag '" + dataset.bags[b].id + "' has no windows");
    }
    out.emplace_back(best, dataset.bags[b].label);
  }
  return out;
}

MetricSet evaluate(const Predictions& predictions, const data::Dataset& dataset, EvalMode mode) {
  std::vector<double> pred, truth;
  if (mode == EvalMode::frame) {
    for (const auto& t : frame_traces(predictions, dataset)) {
      pred.push_back(t.prediction);
      truth.push_back(t.truth);
    }
  } else {
    for (const auto& [p, y] : sequence_pairs(predictions, dataset)) {
      pred.push_back(p);
      truth.push_back(y);
    }
  }
  if (pred.empty()) throw ProtocolError("nothing to evaluate");
  return score(pred, truth);
}

EvalReport evaluate_report(const Predictions& predictions, const data::Dataset& dataset) {
  EvalReport r;
  r.frame = evaluate(predictions, dataset, EvalMode::frame);
  r.sequence = evaluate(predictions, dataset, EvalMode::sequence);
  r.frames = frame_traces(predictions, dataset).size();
  r.sequences = dataset.bags.size();
  return r;
}

}  // namespace wsda::metrics
