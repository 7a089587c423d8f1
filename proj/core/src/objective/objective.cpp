#include "wsda/objective/objective.hpp"

#include <cmath>
#include <string>

#include "wsda/error.hpp"
#include "wsda/num/ops.hpp"

namespace wsda::objective {

void TrainingConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (max_epochs == 0) throw ConfigError("train.max_epochs must be >= 1");
  if (!(gamma > 0.0)) throw ConfigError("train.gamma must be > 0");
  if (anneal_every == 0) throw ConfigError("train.anneal_every must be >= 1");
  if (!(anneal_factor > 0.0 && anneal_factor <= 1.0)) {
    throw ConfigError("train.anneal_factor must be in (0,1]");
  }
  if (fixed_lambda && !(*fixed_lambda >= 0.0)) throw ConfigError("fixed lambda must be >= 0");
}

double TrainingConfig::lr_at(std::size_t epoch) const {
  if (epoch < anneal_start) return lr;
  const std::size_t steps = (epoch - anneal_start) / anneal_every;
  return lr * std::pow(anneal_factor, static_cast<double>(steps));
}

double TrainingConfig::lambda_at(std::size_t epoch) const {
  if (fixed_lambda) return *fixed_lambda;
  return lambda_schedule(epoch, max_epochs, gamma);
}

Var loss_source(std::span<const Var> predictions, std::span<const std::vector<double>> labels) {
  if (predictions.empty()) throw ProtocolError("source loss over zero windows");
  if (predictions.size() != labels.size()) {
    throw DimensionError("source loss: " + std::to_string(predictions.size()) +
                         " predictions but " + std::to_string(labels.size()) + " label sets");
  }
  num::Tape& tape = predictions.front().tape();
  std::vector<Var> per_window;
  per_window.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (labels[i].empty()) {
      throw ProtocolError("source window " + std::to_string(i) + " has no frame labels");
    }
    Var target = tape.constant(Tensor::vector(labels[i]));
    per_window.push_back(num::mse(predictions[i], target));
  }
  return num::mean_scalars(per_window);
}

Var loss_domain(std::span<const Var> logits, std::span<const int> domains) {
  if (logits.empty()) throw ProtocolError("domain loss over zero windows");
  if (logits.size() != domains.size()) {
    throw DimensionError("domain loss: " + std::to_string(logits.size()) + " logits but " +
                         std::to_string(domains.size()) + " domain tags");
  }
  std::vector<Var> terms;
  terms.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    terms.push_back(num::logistic_loss(logits[i], domains[i]));
  }
  return num::mean_scalars(terms);
}

Var loss_target(std::span<const std::vector<Var>> bag_predictions,
                std::span<const double> bag_labels) {
  if (bag_predictions.empty()) throw ProtocolError("target loss over zero bags");
  if (bag_predictions.size() != bag_labels.size()) {
    throw DimensionError("target loss: " + std::to_string(bag_predictions.size()) +
                         " bags but " + std::to_string(bag_labels.size()) + " labels");
  }
  std::vector<Var> terms;
  terms.reserve(bag_predictions.size());
  for (std::size_t i = 0; i < bag_predictions.size(); ++i) {
    const auto& preds = bag_predictions[i];
    if (preds.empty()) throw ProtocolError("target bag " + std::to_string(i) + " is empty");
    num::Tape& tape = preds.front().tape();
    Var bag_max = num::temporal_reduce(num::stack_scalars(preds), num::Reduce::max);
    terms.push_back(num::mse(bag_max, tape.constant(Tensor::scalar(bag_labels[i]))));
  }
  return num::mean_scalars(terms);
}

double total_loss(double source, double target, double domain, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  return source + target - lambda * domain;
}

double lambda_schedule(std::size_t epoch, std::size_t max_epochs, double gamma) {
  if (max_epochs == 0) throw ConfigError("lambda schedule needs max_epochs >= 1");
  if (epoch > max_epochs) throw ConfigError("lambda schedule epoch exceeds max_epochs");
  const double p = static_cast<double>(epoch) / static_cast<double>(max_epochs);
  return 2.0 / (1.0 + std::exp(-gamma * p)) - 1.0;
}

std::vector<double> pool_labels(std::span<const double> frame_labels, std::size_t factor) {
  if (factor == 0 || frame_labels.size() % factor != 0) {
    throw DimensionError("cannot pool " + std::to_string(frame_labels.size()) +
                         " frame labels in groups of " + std::to_string(factor));
  }
  std::vector<double> out(frame_labels.size() / factor, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < factor; ++j) s += frame_labels[i * factor + j];
    out[i] = s / static_cast<double>(factor);
  }
  return out;
}

void sgd_update(std::span<Tensor* const> params, std::span<const Tensor> grads,
                const TrainingConfig& config, double lr, OptimizerState& state) {
  if (params.size() != grads.size()) {
    throw DimensionError("sgd_update: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.velocity.size() != params.size()) {
    state.velocity.clear();
    for (const Tensor* p : params) state.velocity.emplace_back(p->shape(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i];
    const Tensor& g = grads[i];
    if (g.shape() != theta.shape()) {
      throw DimensionError("sgd_update: gradient " + std::to_string(i) + " has shape " +
                           num::shape_string(g.shape()) + ", parameter has " +
                           num::shape_string(theta.shape()));
    }
    Tensor& v = state.velocity[i];
    for (std::size_t k = 0; k < theta.numel(); ++k) {
      if (config.vanilla) {
        theta[k] -= lr * g[k];
      } else {
        v[k] = config.momentum * v[k] + g[k] + config.weight_decay * theta[k];
        theta[k] -= lr * v[k];
      }
    }
  }
}

void sgd_update(net::ModelParams& params, std::span<const Tensor> grads,
                const TrainingConfig& config, double lr, OptimizerState& state) {
  std::vector<Tensor*> ptrs;
  for (auto* g : {&params.theta_f, &params.theta_l, &params.theta_wl, &params.theta_d}) {
    for (auto& nt : *g) ptrs.push_back(&nt.value);
  }
  sgd_update(ptrs, grads, config, lr, state);
}

}  // namespace wsda::objective
