#pragma once

// Builds the three WSDA losses on a single tape from explicit windows so that
// tests can seed any combination of them.

#include <random>
#include <vector>

#include "support/oracles.hpp"
#include "wsda/net/model.hpp"
#include "wsda/objective/objective.hpp"

namespace wsda::testing {

inline net::ModelConfig tiny_model(std::uint64_t seed = 3) {
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

/// Two labelled source windows and one target bag of two windows.
struct GraphInputs {
  std::vector<num::Tensor> source_windows;
  std::vector<std::vector<double>> source_labels;  // at feature resolution
  std::vector<num::Tensor> target_windows;
  double bag_label = 0.0;
};

inline GraphInputs random_inputs(const net::ModelConfig& c, std::mt19937_64& rng) {
  GraphInputs in;
  std::uniform_real_distribution<double> level(0.0, 5.0);
  for (int i = 0; i < 2; ++i) {
    in.source_windows.push_back(random_tensor(c.window_shape(), rng));
    std::vector<double> labels(c.feature_steps());
    for (double& l : labels) l = level(rng);
    in.source_labels.push_back(labels);
  }
  for (int i = 0; i < 2; ++i) in.target_windows.push_back(random_tensor(c.window_shape(), rng));
  in.bag_label = level(rng);
  return in;
}

struct LossVars {
  num::Var source, target, domain;
};

/// Losses from bound parameter groups; the domain head sits behind grl(lambda).
inline LossVars wsda_losses(num::Tape& tape, const net::ModelConfig& c,
                            const net::BoundParams& p, const GraphInputs& in, double lambda) {
  std::vector<num::Var> preds, logits;
  std::vector<int> domains;
  for (const auto& w : in.source_windows) {
    num::Var f = net::features(c, p.f, tape.constant(w));
    preds.push_back(net::label_head(p.l, f));
    logits.push_back(net::domain_head(p.d, f, lambda));
    domains.push_back(0);
  }
  std::vector<num::Var> bag;
  for (const auto& w : in.target_windows) {
    num::Var f = net::features(c, p.f, tape.constant(w));
    bag.push_back(net::weak_head(p.wl, f));
    logits.push_back(net::domain_head(p.d, f, lambda));
    domains.push_back(1);
  }
  std::vector<std::vector<num::Var>> bags{bag};
  std::vector<double> labels{in.bag_label};
  return {objective::loss_source(preds, in.source_labels), objective::loss_target(bags, labels),
          objective::loss_domain(logits, domains)};
}

}  // namespace wsda::testing
