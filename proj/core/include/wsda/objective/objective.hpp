#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wsda/net/model.hpp"
#include "wsda/num/tape.hpp"

namespace wsda::objective {

using num::Tensor;
using num::Var;

struct TrainingConfig {
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 50;
  double gamma = 10.0;  // lambda schedule gain
  /// Multiply lr by anneal_factor every anneal_every epochs once past anneal_start.
  std::size_t anneal_start = 20;
  std::size_t anneal_every = 5;
  double anneal_factor = 0.1;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  /// Plain theta -= lr * g updates (no momentum, no decay).
  bool vanilla = false;
  /// Overrides the schedule with a constant lambda (used by the lambda = 0 control).
  std::optional<double> fixed_lambda;

  void validate() const;
  double lr_at(std::size_t epoch) const;
  double lambda_at(std::size_t epoch) const;
};

struct LossReport {
  std::size_t epoch = 0;
  double lambda = 0.0;
  double source = 0.0;  // L_S
  double target = 0.0;  // L_T
  double domain = 0.0;  // L_d
  double total = 0.0;   // L_S + L_T - lambda * L_d
};

/// L_S: mean over windows of the per-window frame MSE. `labels[i]` holds the
/// labels of window i at the prediction's temporal resolution; an empty entry
/// means the window is unlabeled, which is a ProtocolError.
Var loss_source(std::span<const Var> predictions, std::span<const std::vector<double>> labels);

/// L_d: mean logistic loss over all windows; domains are 0 (source) or 1 (target).
Var loss_domain(std::span<const Var> logits, std::span<const int> domains);

/// L_T: mean over bags of (max instance prediction - Y)^2.
Var loss_target(std::span<const std::vector<Var>> bag_predictions,
                std::span<const double> bag_labels);

double total_loss(double source, double target, double domain, double lambda);

/// 2 / (1 + exp(-gamma p)) - 1 with p = epoch / max_epochs.
double lambda_schedule(std::size_t epoch, std::size_t max_epochs, double gamma);

/// Averages consecutive groups of `factor` frame labels (frame -> timestep resolution).
std::vector<double> pool_labels(std::span<const double> frame_labels, std::size_t factor);

/// Momentum buffers, one per parameter tensor, lazily zero-initialised.
struct OptimizerState {
  std::vector<Tensor> velocity;
};

/// v <- momentum v + g + decay theta; theta <- theta - lr v.
/// With config.vanilla: theta <- theta - lr g.
void sgd_update(std::span<Tensor* const> params, std::span<const Tensor> grads,
                const TrainingConfig& config, double lr, OptimizerState& state);

/// Applies sgd_update to every tensor of `params` in flatten() order.
void sgd_update(net::ModelParams& params, std::span<const Tensor> grads,
                const TrainingConfig& config, double lr, OptimizerState& state);

}  // namespace wsda::objective
