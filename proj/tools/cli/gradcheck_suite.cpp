#include "cli/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "wsda/error.hpp"
#include "wsda/net/model.hpp"
#include "wsda/num/ops.hpp"
#include "wsda/objective/objective.hpp"

namespace wsda::cli {
namespace {

using num::GraphFn;
using num::Shape;
using num::Tape;
using num::Tensor;
using num::Var;

constexpr std::size_t kMaxRedraws = 50;

Tensor uniform(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Projects any output onto a scalar through a squared distance to a fixed target.
Var project(Tape& tape, Var y, const Tensor& target) { return num::mse(y, tape.constant(target)); }

struct Case {
  std::string name;
  std::vector<Shape> shapes;
  // Builds the graph and, optionally, a reference for the check from the drawn point.
  std::function<GraphFn(std::mt19937_64&)> graph;
  std::function<num::GradCheckOptions(const GraphFn&)> options;
};

GradCheckCase run_case(const Case& c, std::mt19937_64& rng) {
  GradCheckCase out{c.name, {}, 0};
  for (; out.redraws < kMaxRedraws; ++out.redraws) {
    std::vector<Tensor> point;
    for (const auto& s : c.shapes) point.push_back(uniform(s, rng));
    const GraphFn graph = c.graph(rng);
    const auto options = c.options ? c.options(graph) : num::GradCheckOptions{};
    out.result = num::finite_difference_check(graph, point, kGradCheckEps, options);
    if (out.result.kink_margin >= kMinKinkMargin) return out;
  }
  throw ContractError("gradcheck " + c.name + ": no kink-free point after redraws");
}

std::vector<Case> op_cases() {
  std::vector<Case> cases;
  auto projected = [](Shape out_shape, std::function<Var(Tape&, std::span<const Var>)> body) {
    return [out_shape, body](std::mt19937_64& rng) -> GraphFn {
      Tensor target = uniform(out_shape, rng);
      return [body, target](Tape& tape, std::span<const Var> x) { return project(tape, body(tape, x), target); };
    };
  };
  cases.push_back({"conv3d", {{2, 5, 4, 4}, {3, 2, 3, 3, 3}, {3}},
                   projected({3, 3, 2, 4}, [](Tape&, std::span<const Var> x) {
                     return num::conv3d(x[0], x[1], x[2], {2, 2, 1}, {1, 1, 1});
                   }), {}});
  cases.push_back({"affine_vector", {{4}, {3, 4}, {3}},
                   projected({3}, [](Tape&, std::span<const Var> x) { return num::affine(x[0], x[1], x[2]); }), {}});
  cases.push_back({"affine_rows", {{5, 4}, {3, 4}, {3}},
                   projected({5, 3}, [](Tape&, std::span<const Var> x) { return num::affine(x[0], x[1], x[2]); }), {}});
  cases.push_back({"relu", {{3, 4}},
                   projected({3, 4}, [](Tape&, std::span<const Var> x) { return num::relu(x[0]); }), {}});
  cases.push_back({"sigmoid", {{3, 4}},
                   projected({3, 4}, [](Tape&, std::span<const Var> x) { return num::sigmoid(x[0]); }), {}});
  cases.push_back({"temporal_mean", {{5, 3}},
                   projected({3}, [](Tape&, std::span<const Var> x) {
                     return num::temporal_reduce(x[0], num::Reduce::mean);
                   }), {}});
  cases.push_back({"temporal_max", {{5, 3}},
                   projected({3}, [](Tape&, std::span<const Var> x) {
                     return num::temporal_reduce(x[0], num::Reduce::max);
                   }), {}});
  cases.push_back({"spatial_mean", {{2, 3, 4, 4}},
                   projected({3, 2}, [](Tape&, std::span<const Var> x) { return num::spatial_mean(x[0]); }), {}});
  cases.push_back({"mse", {{6}, {6}},
                   [](std::mt19937_64&) -> GraphFn {
                     return [](Tape&, std::span<const Var> x) { return num::mse(x[0], x[1]); };
                   }, {}});
  for (int label : {0, 1}) {
    cases.push_back({"logistic_loss_" + std::to_string(label), {{1}},
                     [label](std::mt19937_64&) -> GraphFn {
                       return [label](Tape&, std::span<const Var> x) { return num::logistic_loss(x[0], label); };
                     }, {}});
  }
  cases.push_back({"stack_scalars", {{1}, {1}, {1}},
                   projected({3, 1}, [](Tape&, std::span<const Var> x) { return num::stack_scalars(x); }), {}});
  cases.push_back({"mean_scalars", {{1}, {1}, {1}},
                   projected({1}, [](Tape&, std::span<const Var> x) { return num::mean_scalars(x); }), {}});
  cases.push_back({"weighted_sum", {{1}, {1}, {1}},
                   projected({1}, [](Tape&, std::span<const Var> x) {
                     const double coeffs[] = {0.5, -2.0, 1.25};
                     return num::weighted_sum(x, coeffs);
                   }), {}});
  cases.push_back({"scale", {{2, 3}},
                   projected({2, 3}, [](Tape&, std::span<const Var> x) { return num::scale(x[0], -1.7); }), {}});
  cases.push_back({"reshape", {{2, 3}},
                   projected({3, 2}, [](Tape&, std::span<const Var> x) { return num::reshape(x[0], {3, 2}); }), {}});

  // The reversed layer's backward is -lambda times the derivative of its forward
  // value, so the numeric target is -lambda times the plain projection.
  constexpr double kLambda = 0.6;
  cases.push_back({"grl", {{2, 3}},
                   [](std::mt19937_64& rng) -> GraphFn {
                     Tensor target = uniform({2, 3}, rng);
                     return [target](Tape& tape, std::span<const Var> x) {
                       return project(tape, net::grl(x[0], kLambda), target);
                     };
                   },
                   [](const GraphFn& graph) {
                     num::GradCheckOptions o;
                     o.reference = [graph](std::span<const Tensor> p) {
                       return -kLambda * num::evaluate_graph(graph, p);
                     };
                     return o;
                   }});
  return cases;
}

net::ModelConfig graph_model(std::uint64_t seed) {
  net::ModelConfig c;
  c.height = 4;
  c.width = 4;
  c.window = 4;
  c.blocks = {{2, {3, 3, 3}, 2, 1}, {3, {3, 3, 3}, 2, 1}};
  c.head_hidden = 4;
  c.init_scale = 2.0;
  c.seed = seed;
  return c;
}

struct GraphData {
  std::vector<Tensor> source_windows;
  std::vector<std::vector<double>> source_labels;
  std::vector<Tensor> target_windows;
  double bag_label = 0.0;
  double lambda = 0.0;
};

struct Losses {
  Var source, target, domain;
};

Losses build_losses(Tape& tape, const net::ModelConfig& c, std::span<const Var> leaves,
                    const std::array<std::size_t, 4>& counts, const GraphData& d) {
  auto group = [&](std::size_t g) {
    std::size_t begin = 0;
    for (std::size_t i = 0; i < g; ++i) begin += counts[i];
    return leaves.subspan(begin, counts[g]);
  };
  const auto f = group(0), l = group(1), wl = group(2), dom = group(3);
  std::vector<Var> preds, logits, bag;
  std::vector<int> domains;
  for (const auto& w : d.source_windows) {
    Var feats = net::features(c, f, tape.constant(w));
    preds.push_back(net::label_head(l, feats));
    logits.push_back(net::domain_head(dom, feats, d.lambda));
    domains.push_back(0);
  }
  for (const auto& w : d.target_windows) {
    Var feats = net::features(c, f, tape.constant(w));
    bag.push_back(net::weak_head(wl, feats));
    logits.push_back(net::domain_head(dom, feats, d.lambda));
    domains.push_back(1);
  }
  const std::vector<std::vector<Var>> bags{bag};
  const std::vector<double> labels{d.bag_label};
  return {objective::loss_source(preds, d.source_labels), objective::loss_target(bags, labels),
          objective::loss_domain(logits, domains)};
}

// One backward pass of L_S + L_T + L_d with L_d behind the reversal layer. The
// numeric target for theta_f, theta_l and theta_wl is L_S + L_T - lambda L_d;
// theta_d sits past the reversal and sees L_S + L_T + L_d.
std::vector<GradCheckCase> full_graph_cases(std::uint64_t seed, std::mt19937_64& rng) {
  const net::ModelConfig c = graph_model(seed);
  const net::ModelParams params = net::init_params(c);
  const std::array<std::size_t, 4> counts{params.theta_f.size(), params.theta_l.size(),
                                          params.theta_wl.size(), params.theta_d.size()};
  std::vector<Tensor> point;
  for (const auto& t : params.flatten()) point.push_back(t.value);

  std::vector<GradCheckCase> out;
  for (bool adversary : {false, true}) {
    GradCheckCase result{adversary ? "wsda_graph_theta_d" : "wsda_graph_theta_f_l_wl", {}, 0};
    for (;; ++result.redraws) {
      if (result.redraws == kMaxRedraws)
        throw ContractError("gradcheck " + result.name + ": no kink-free point after redraws");
      GraphData d;
      std::uniform_real_distribution<double> level(0.0, 1.0), lam(0.1, 1.0);
      for (int i = 0; i < 2; ++i) {
        d.source_windows.push_back(uniform(c.window_shape(), rng));
        std::vector<double> labels(c.feature_steps());
        for (double& v : labels) v = level(rng);
        d.source_labels.push_back(labels);
        d.target_windows.push_back(uniform(c.window_shape(), rng));
      }
      d.bag_label = level(rng);
      d.lambda = lam(rng);

      const GraphFn graph = [c, counts, d](Tape& tape, std::span<const Var> leaves) {
        const Losses L = build_losses(tape, c, leaves, counts, d);
        const Var terms[] = {L.source, L.target, L.domain};
        const double ones[] = {1.0, 1.0, 1.0};
        return num::weighted_sum(terms, ones);
      };
      num::GradCheckOptions options;
      const double domain_coeff = adversary ? 1.0 : -d.lambda;
      options.reference = [c, counts, d, domain_coeff](std::span<const Tensor> p) {
        Tape tape;
        std::vector<Var> leaves;
        for (const auto& t : p) leaves.push_back(tape.constant(t));
        const Losses L = build_losses(tape, c, leaves, counts, d);
        return L.source.value()[0] + L.target.value()[0] + domain_coeff * L.domain.value()[0];
      };
      const std::size_t first = adversary ? counts[0] + counts[1] + counts[2] : 0;
      const std::size_t last = adversary ? point.size() : counts[0] + counts[1] + counts[2];
      for (std::size_t i = first; i < last; ++i) options.checked.push_back(i);

      result.result = num::finite_difference_check(graph, point, kGradCheckEps, options);
      if (result.result.kink_margin >= kMinKinkMargin) break;
    }
    out.push_back(result);
  }
  return out;
}

}  // namespace

std::vector<GradCheckCase> gradcheck_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckCase> results;
  for (const auto& c : op_cases()) results.push_back(run_case(c, rng));
  for (auto& r : full_graph_cases(seed, rng)) results.push_back(std::move(r));
  return results;
}

double worst_error(const std::vector<GradCheckCase>& cases) {
  double worst = 0.0;
  for (const auto& c : cases) worst = std::max(worst, c.result.max_rel_error);
  return worst;
}

}  // namespace wsda::cli
