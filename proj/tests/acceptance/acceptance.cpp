// Acceptance suite: one PASS/FAIL line per criterion. Arguments select a
// subset by number (e.g. `acceptance 1 4 9`); the exit status is nonzero when
// any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "cli/gradcheck_suite.hpp"
#include "support/oracles.hpp"
#include "support/wsda_graph.hpp"
#include "wsda/error.hpp"
#include "wsda/metrics/metrics.hpp"
#include "wsda/train/trainer.hpp"

using namespace wsda;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Every training history produced by criteria 6-9, checked by criterion 10.
std::vector<train::RunHistory> g_histories;

cli::RunConfig benchmark_config() { return cli::load_config(WSDA_BENCHMARK_CONFIG); }

train::ExperimentConfig experiment(const cli::RunConfig& c) {
  train::ExperimentConfig e;
  e.model = c.model;
  e.training = c.training;
  e.bag_length = c.bag_length;
  e.test_subject = c.test_subject;
  e.full_loso = c.full_loso;
  return e;
}

// -- 1 ------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_case;
  std::size_t cases = 0, redraws = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& c : cli::gradcheck_suite(seed)) {
      ++cases;
      redraws += c.redraws;
      if (c.result.max_rel_error >= worst) {
        worst = c.result.max_rel_error;
        worst_case = c.name + " seed " + std::to_string(seed);
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < cli::kGradCheckTolerance && secs < 60.0,
          fmt("%zu checks over 20 seeds, max rel error %.2e (%s), %zu kink redraws, %.1f s", cases,
              worst, worst_case.c_str(), redraws, secs)};
}

// -- 2 ------------------------------------------------------------------------

Outcome grl_contract() {
  std::mt19937_64 rng(2024);
  bool forward_ok = true;
  for (int i = 0; i < 20; ++i) {
    num::Tape tape;
    const auto x = testing::random_tensor({3, 5}, rng, -1e3, 1e3);
    const auto y = net::grl(tape.leaf(x), 0.37 * i).value();
    forward_ok = forward_ok && y.shape() == x.shape() &&
                 std::memcmp(y.data().data(), x.data().data(), x.numel() * sizeof(double)) == 0;
  }

  double worst = 0.0;
  for (double lambda : {0.0, 0.3, 1.0}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto c = testing::tiny_model(seed);
      const auto params = net::init_params(c);
      const auto in = testing::random_inputs(c, rng);
      auto domain_grad_f = [&](bool reversed) {
        num::Tape tape;
        const auto p = net::bind(tape, params);
        std::vector<num::Var> logits;
        std::vector<int> domains;
        auto add = [&](const std::vector<num::Tensor>& windows, int d) {
          for (const auto& w : windows) {
            const auto f = net::features(c, p.f, tape.constant(w));
            logits.push_back(reversed ? net::domain_head(p.d, f, lambda) : net::weak_head(p.d, f));
            domains.push_back(d);
          }
        };
        add(in.source_windows, 0);
        add(in.target_windows, 1);
        tape.backward(objective::loss_domain(logits, domains));
        std::vector<num::Tensor> g;
        for (const auto& v : p.f) g.push_back(tape.grad(v));
        return g;
      };
      const auto reversed = domain_grad_f(true);
      const auto identity = domain_grad_f(false);
      for (std::size_t t = 0; t < reversed.size(); ++t)
        for (std::size_t i = 0; i < reversed[t].numel(); ++i)
          worst = std::max(worst, std::abs(reversed[t][i] - (-lambda) * identity[t][i]));
    }
  }
  return {forward_ok && worst <= 1e-12,
          fmt("forward bit-identical: %s; max |g_grl + lambda g_id| = %.2e over lambda {0,0.3,1} x 5 seeds",
              forward_ok ? "yes" : "no", worst)};
}

// -- 3 ------------------------------------------------------------------------

Outcome gradient_isolation() {
  std::mt19937_64 rng(77);
  std::size_t violations = 0, nonzero_expected = 0, checks = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto c = testing::tiny_model(seed);
    const auto params = net::init_params(c);
    const auto in = testing::random_inputs(c, rng);
    for (int which = 0; which < 3; ++which) {
      num::Tape tape;
      const auto p = net::bind(tape, params);
      const auto losses = testing::wsda_losses(tape, c, p, in, 0.7);
      const num::Var seeds[] = {losses.source, losses.target, losses.domain};
      tape.backward(seeds[which]);
      // which loss may reach which head: L_S -> l, L_T -> wl, L_d -> d
      const std::vector<num::Var>* heads[] = {&p.l, &p.wl, &p.d};
      for (int h = 0; h < 3; ++h) {
        bool any = false;
        for (const auto& v : *heads[h]) {
          const auto grad = tape.grad(v);
          for (double g : grad.data()) any = any || g != 0.0;
        }
        ++checks;
        if (h != which && any) ++violations;
        if (h == which && !any) ++nonzero_expected;
      }
    }
  }
  return {violations == 0 && nonzero_expected == 0,
          fmt("%zu head/loss pairs: %zu cross-talk gradients, %zu missing own gradients", checks,
              violations, nonzero_expected)};
}

// -- 4 ------------------------------------------------------------------------

Outcome mir_invariants() {
  data::GenSpec s;
  s.seed = 4;
  s.subjects = 25;
  s.sequences = 20;
  s.frames = 16;
  s.height = 2;
  s.width = 2;
  s.window = 4;
  s.stride = 4;
  const auto pair = data::synth_generate(s);
  std::size_t bags = 0, zero_bags = 0, bad = 0;
  for (const auto* ds : {&pair.source, &pair.target}) {
    for (const auto& bag : ds->bags) {
      ++bags;
      if (bag.label != *std::max_element(bag.hidden.begin(), bag.hidden.end())) ++bad;
      if (bag.label != 0.0) continue;
      ++zero_bags;
      for (double h : bag.hidden) bad += h != 0.0;
      for (double l : bag.frame_labels) bad += l != 0.0;
      for (const auto& inst : bag.instances)
        for (double l : inst.frame_labels) bad += l != 0.0;
    }
  }
  const int table[16] = {0, 1, 2, 3, 4, 4, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5};
  int table_bad = 0;
  for (int v = 0; v < 16; ++v) table_bad += data::quantize_pspi(v) != table[v];
  return {bags == 1000 && zero_bags > 0 && bad == 0 && table_bad == 0,
          fmt("%zu bags (%zu zero bags), %zu violations; quantize table mismatches %d/16", bags,
              zero_bags, bad, table_bad)};
}

// -- 5 ------------------------------------------------------------------------

Outcome metric_oracles() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> size(3, 60);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = size(rng);
    std::vector<double> x(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = u(rng);
      y[k] = 0.6 * x[k] + u(rng);
    }
    worst = std::max({worst, std::abs(metrics::pcc(x, y) - testing::pcc_oracle(x, y)),
                      std::abs(metrics::mae(x, y) - testing::mae_oracle(x, y)),
                      std::abs(metrics::icc31(x, y) - testing::icc31_anova_oracle(x, y))});
  }
  const std::vector<double> a{1, 2, 3}, b{1, 2, 4};
  const double pcc_hand = 3.0 / std::sqrt(2.0 * 14.0 / 3.0);
  const std::vector<double> p{1, 3}, g{0, 1};
  const std::vector<double> r1{1, 2, 3, 4}, shifted{3.5, 4.5, 5.5, 6.5}, anti{8, 5, 3, 0};
  // summation order differs from the closed forms, so allow a few ulp
  const auto ulps = [](double x, double want) {
    return std::abs(x - want) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(want);
  };
  const bool examples = ulps(metrics::pcc(a, b), pcc_hand) && metrics::mae(p, g) == 1.5 &&
                        ulps(metrics::icc31(r1, shifted), 1.0) &&
                        ulps(metrics::icc31(r1, anti), -2.0 / 3.0);
  return {worst <= 1e-12 && examples,
          fmt("100 random cases, max |lib - oracle| = %.2e; hand examples %s", worst,
              examples ? "match within 4 ulp" : "MISMATCH")};
}

// -- 6 ------------------------------------------------------------------------

Outcome scenario_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto base = benchmark_config();
  const std::vector<std::string> names{"source_only", "uda", "wsda", "sda"};
  std::map<std::string, std::vector<double>> pcc;
  for (const auto seed : base.run_seeds()) {
    const auto config = base.with_seed(seed);
    const auto pair = data::synth_generate(config.gen);
    for (const auto& name : names) {
      const auto r = train::run_scenario(train::Scenario::parse(name), pair.source, pair.target,
                                         experiment(config));
      pcc[name].push_back(r.report.frame.pcc.value_or(-1.0));
      g_histories.push_back(r.run.history);
    }
  }
  const double secs = seconds_since(t0);
  std::vector<double> med;
  for (const auto& n : names) med.push_back(median(pcc[n]));
  bool ordered = true;
  for (std::size_t i = 0; i + 1 < med.size(); ++i) ordered = ordered && med[i + 1] - med[i] >= 0.02;
  return {ordered && secs < 15 * 60.0,
          fmt("median frame PCC source_only %.3f, uda %.3f, wsda %.3f, sda %.3f over %zu seeds; %.0f s",
              med[0], med[1], med[2], med[3], base.run_seeds().size(), secs)};
}

// -- 7 ------------------------------------------------------------------------

Outcome domain_confusion() {
  const auto base = benchmark_config();
  std::vector<double> adversarial, control;
  for (const auto seed : base.run_seeds()) {
    const auto config = base.with_seed(seed);
    const auto pair = data::synth_generate(config.gen);
    // held-out probe windows from an independent generator seed
    auto probe_spec = config.gen;
    probe_spec.seed = data::derive_seed(seed, "domain-probe");
    const auto probe = data::synth_generate(probe_spec);
    const auto scenario = train::Scenario::make(train::ScenarioKind::wsda);
    for (bool reversed : {true, false}) {
      auto training = config.training;
      if (!reversed) training.fixed_lambda = 0.0;
      const auto r = train::train(scenario, pair.source, pair.target, nullptr, config.model, training);
      g_histories.push_back(r.history);
      const double acc = train::domain_accuracy(r.params, config.model, probe.source, probe.target);
      (reversed ? adversarial : control).push_back(acc);
    }
  }
  const double a = median(adversarial), c = median(control);
  return {a < c, fmt("median held-out domain accuracy: wsda %.3f, lambda=0 control %.3f", a, c)};
}

// -- 8 ------------------------------------------------------------------------

Outcome annotation_sweep() {
  const auto base = benchmark_config();
  const std::vector<std::size_t> lengths{8, 16, 32, 64};
  std::map<std::size_t, std::vector<double>> pcc;
  for (const auto seed : base.run_seeds()) {
    const auto config = base.with_seed(seed);
    const auto pair = data::synth_generate(config.gen);
    for (std::size_t length : lengths) {
      auto e = experiment(config);
      e.bag_length = length;
      const auto r = train::run_scenario(train::Scenario::make(train::ScenarioKind::wsda), pair.source,
                                         pair.target, e);
      pcc[length].push_back(r.report.frame.pcc.value_or(-1.0));
      g_histories.push_back(r.run.history);
    }
  }
  std::vector<double> med;
  for (auto l : lengths) med.push_back(median(pcc[l]));
  int inversions = 0;
  bool small_inversions = true;
  for (std::size_t i = 0; i + 1 < med.size(); ++i) {
    if (med[i + 1] > med[i]) {
      ++inversions;
      small_inversions = small_inversions && med[i + 1] - med[i] <= 0.01;
    }
  }
  const bool pass = med.front() >= med.back() && inversions <= 1 && small_inversions;
  return {pass, fmt("median frame PCC at bag length 8/16/32/64: %.3f %.3f %.3f %.3f; %d inversion(s)",
                    med[0], med[1], med[2], med[3], inversions)};
}

// -- 9 ------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "wsda_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::string> files[2];
  for (int run = 0; run < 2; ++run) {
    const std::vector<std::string> overrides{"out=" + (root / std::to_string(run)).string(),
                                             "fold.full_loso=false"};
    const auto config = cli::load_config(WSDA_BENCHMARK_CONFIG, overrides);
    const auto out = cli::cmd_train(config);
    g_histories.push_back(out.result.run.history);
    files[run] = {slurp(out.reports.losses), slurp(out.checkpoint)};
  }
  const bool same = !files[0][0].empty() && !files[0][1].empty() && files[0] == files[1];
  fs::remove_all(root);
  return {same, fmt("losses.csv %zu bytes, checkpoint %zu bytes: %s", files[0][0].size(),
                    files[0][1].size(), same ? "byte-identical" : "DIFFER")};
}

// -- 10 -----------------------------------------------------------------------

Outcome loss_identity() {
  if (g_histories.empty()) {
    auto config = benchmark_config();
    config.full_loso = false;
    const auto pair = data::synth_generate(config.gen);
    g_histories.push_back(train::run_scenario(train::Scenario::make(train::ScenarioKind::wsda),
                                              pair.source, pair.target, experiment(config))
                              .run.history);
  }
  std::size_t epochs = 0;
  double worst = 0.0;
  for (const auto& h : g_histories) {
    for (const auto& e : h.epochs) {
      const auto& l = e.losses;
      worst = std::max(worst, std::abs(l.total - (l.source + l.target - l.lambda * l.domain)));
      ++epochs;
    }
  }
  return {epochs > 0 && worst <= 1e-12,
          fmt("%zu epochs over %zu runs, max |total - (L_S + L_T - lambda L_d)| = %.2e", epochs,
              g_histories.size(), worst)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_correctness},
      {2, "GRL contract", grl_contract},
      {3, "gradient isolation", gradient_isolation},
      {4, "MIR invariants", mir_invariants},
      {5, "metric oracles", metric_oracles},
      {6, "scenario ordering", scenario_ordering},
      {7, "domain confusion", domain_confusion},
      {8, "annotation sweep", annotation_sweep},
      {9, "determinism", determinism},
      {10, "loss report identity", loss_identity},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %2d %-22s %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
