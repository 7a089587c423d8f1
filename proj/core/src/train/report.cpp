#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "wsda/error.hpp"
#include "wsda/train/trainer.hpp"

namespace wsda::train {

namespace {

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::ordered_json metric_json(const metrics::MetricSet& m) {
  nlohmann::ordered_json j;
  j["pcc"] = m.pcc ? nlohmann::ordered_json(*m.pcc) : nlohmann::ordered_json(nullptr);
  j["mae"] = m.mae;
  j["icc"] = m.icc ? nlohmann::ordered_json(*m.icc) : nlohmann::ordered_json(nullptr);
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string metrics_json(const std::string& scenario, std::uint64_t seed,
                         const metrics::EvalReport& report) {
  nlohmann::ordered_json j;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["frame"] = metric_json(report.frame);
  j["sequence"] = metric_json(report.sequence);
  j["frames"] = report.frames;
  j["sequences"] = report.sequences;
  return j.dump(2) + "\n";
}

std::string loss_csv(const RunHistory& history) {
  std::string out = "epoch,lambda,L_S,L_T,L_d,total\n";
  for (const auto& e : history.epochs) {
    const auto& l = e.losses;
    out += std::to_string(l.epoch) + "," + real(l.lambda) + "," + real(l.source) + "," +
           real(l.target) + "," + real(l.domain) + "," + real(l.total) + "\n";
  }
  return out;
}

std::string trace_csv(const std::vector<metrics::FrameTrace>& traces) {
  std::string out = "sequence,frame,gt,pred\n";
  for (const auto& t : traces) {
    out += t.sequence + "," + std::to_string(t.frame) + "," + real(t.truth) + "," +
           real(t.prediction) + "\n";
  }
  return out;
}

ReportPaths emit_report(const std::filesystem::path& dir, const std::string& scenario,
                        std::uint64_t seed, const RunHistory& history,
                        const metrics::EvalReport& report,
                        const std::vector<metrics::FrameTrace>& traces) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  ReportPaths p{dir / "metrics.json", dir / "losses.csv", dir / "trace.csv"};
  write_text(p.metrics, metrics_json(scenario, seed, report));
  write_text(p.losses, loss_csv(history));
  write_text(p.traces, trace_csv(traces));
  return p;
}

}  // namespace wsda::train
