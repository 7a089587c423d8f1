#include "wsda/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "wsda/error.hpp"
#include "wsda/num/ops.hpp"

namespace wsda::train {

using data::Bag;
using data::Dataset;
using data::Domain;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

struct WindowRef {
  std::size_t bag;
  std::size_t inst;
};

void check_domain(const Dataset& ds, Domain expected, const char* role) {
  for (const auto& bag : ds.bags) {
    if (bag.domain != expected) {
      throw ProtocolError(std::string(role) + " dataset contains " + data::domain_name(bag.domain) +
                          " bag '" + bag.id + "'");
    }
  }
}

std::vector<WindowRef> window_refs(const Dataset& ds) {
  std::vector<WindowRef> out;
  for (std::size_t b = 0; b < ds.bags.size(); ++b)
    for (std::size_t i = 0; i < ds.bags[b].instances.size(); ++i) out.push_back({b, i});
  return out;
}

template <typename T>
void shuffle_with(std::vector<T>& v, std::uint64_t seed, const std::string& key) {
  std::mt19937_64 rng(data::derive_seed(seed, key));
  std::shuffle(v.begin(), v.end(), rng);
}

double frame_pcc_or_floor(const metrics::MetricSet& m) { return m.pcc.value_or(-2.0); }

// One optimisation step's worth of data.
struct StepPlan {
  std::vector<WindowRef> source;
  std::vector<WindowRef> target_windows;     // frame-level or domain-only target use
  std::vector<std::size_t> target_bags;      // whole bags for the weak loss
};

class EpochPlanner {
 public:
  EpochPlanner(const Scenario& sc, const Dataset& source, const Dataset& target,
               std::size_t batch)
      : sc_(sc), source_(source), target_(target), batch_(batch) {
    if (sc_.uses_source()) src_all_ = window_refs(source);
    if (sc_.uses_target()) {
      if (sc_.target_weak_loss) {
        for (std::size_t b = 0; b < target.bags.size(); ++b) {
          if (target.bags[b].instances.empty()) {
            throw ProtocolError("target bag '" + target.bags[b].id + "' has no windows");
          }
          bags_all_.push_back(b);
        }
      } else {
        tgt_all_ = window_refs(target);
      }
    }
    if (sc_.uses_source() && src_all_.empty()) throw ProtocolError("source domain has no windows");
    if (sc_.uses_target() && tgt_all_.empty() && bags_all_.empty()) {
      throw ProtocolError("target domain has no windows");
    }
  }

  std::vector<StepPlan> plan(std::size_t epoch, std::uint64_t seed) const {
    auto src = src_all_;
    auto tgt = tgt_all_;
    auto bags = bags_all_;
    const std::string e = std::to_string(epoch);
    shuffle_with(src, seed, "epoch:" + e + ":source");
    shuffle_with(tgt, seed, "epoch:" + e + ":target");
    shuffle_with(bags, seed, "epoch:" + e + ":bags");

    const std::size_t n_tgt = sc_.target_weak_loss ? target_.window_count() : tgt.size();
    const std::size_t steps =
        std::max((src.size() + batch_ - 1) / batch_, (n_tgt + batch_ - 1) / batch_);

    std::vector<StepPlan> out(steps);
    std::size_t si = 0, ti = 0, bi = 0;
    for (auto& step : out) {
      for (std::size_t k = 0; k < batch_ && !src.empty(); ++k) step.source.push_back(src[si++ % src.size()]);
      for (std::size_t k = 0; k < batch_ && !tgt.empty(); ++k) step.target_windows.push_back(tgt[ti++ % tgt.size()]);
      std::size_t taken = 0;
      while (!bags.empty() && taken < batch_) {
        const std::size_t b = bags[bi++ % bags.size()];
        step.target_bags.push_back(b);
        taken += target_.bags[b].instances.size();
      }
    }
    return out;
  }

 private:
  const Scenario& sc_;
  const Dataset& source_;
  const Dataset& target_;
  std::size_t batch_;
  std::vector<WindowRef> src_all_, tgt_all_;
  std::vector<std::size_t> bags_all_;
};

struct StepLosses {
  double source = 0.0, target = 0.0, domain = 0.0;
};

StepLosses run_step(const Scenario& sc, const LabelAccess& access, const StepPlan& plan,
                    const Dataset& source, const Dataset& target, const net::ModelConfig& model,
                    net::ModelParams& params, const objective::TrainingConfig& training,
                    double lambda, double lr, objective::OptimizerState& opt) {
  Tape tape;
  const net::BoundParams bound = net::bind(tape, params);
  const std::size_t factor = model.temporal_factor();

  std::vector<Var> src_preds, tgt_preds, logits;
  std::vector<std::vector<double>> src_labels, tgt_labels;
  std::vector<int> domains;
  std::vector<std::vector<Var>> bag_preds;
  std::vector<double> bag_labels;

  auto window_feats = [&](const data::Instance& inst) {
    return net::features(model, bound.f, tape.constant(inst.window));
  };
  auto add_domain = [&](Var feats, int d) {
    if (sc.adversarial) {
      logits.push_back(net::domain_head(bound.d, feats, lambda));
      domains.push_back(d);
    }
  };

  for (const auto& ref : plan.source) {
    const Bag& bag = source.bags[ref.bag];
    const auto& inst = bag.instances[ref.inst];
    Var feats = window_feats(inst);
    if (sc.source_loss) {
      src_preds.push_back(net::label_head(bound.l, feats));
      src_labels.push_back(objective::pool_labels(access.frame_labels(bag, inst), factor));
    }
    add_domain(feats, 0);
  }
  for (const auto& ref : plan.target_windows) {
    const Bag& bag = target.bags[ref.bag];
    const auto& inst = bag.instances[ref.inst];
    Var feats = window_feats(inst);
    if (sc.target_frame_loss) {
      tgt_preds.push_back(net::label_head(bound.l, feats));
      tgt_labels.push_back(objective::pool_labels(access.frame_labels(bag, inst), factor));
    }
    add_domain(feats, 1);
  }
  for (std::size_t b : plan.target_bags) {
    const Bag& bag = target.bags[b];
    std::vector<Var> preds;
    for (const auto& inst : bag.instances) {
      Var feats = window_feats(inst);
      preds.push_back(net::weak_head(bound.wl, feats));
      add_domain(feats, 1);
    }
    bag_preds.push_back(std::move(preds));
    bag_labels.push_back(access.weak_label(bag));
  }

  StepLosses out;
  std::vector<Var> terms;
  if (!src_preds.empty()) {
    Var ls = objective::loss_source(src_preds, src_labels);
    out.source = ls.value().item();
    terms.push_back(ls);
  }
  if (!tgt_preds.empty()) {
    Var lt = objective::loss_source(tgt_preds, tgt_labels);
    out.target = lt.value().item();
    terms.push_back(lt);
  }
  if (!bag_preds.empty()) {
    Var lt = objective::loss_target(bag_preds, bag_labels);
    out.target = lt.value().item();
    terms.push_back(lt);
  }
  if (!logits.empty()) {
    Var ld = objective::loss_domain(logits, domains);
    out.domain = ld.value().item();
    terms.push_back(ld);
  }
  if (terms.empty()) return out;

  // The GRL turns this plain sum into L_S + L_T - lambda L_d for theta_f
  // while theta_d still descends on L_d.
  const std::vector<double> ones(terms.size(), 1.0);
  Var objective_var = num::weighted_sum(terms, ones);
  const auto all = bound.all();
  const auto grads = num::backward(tape, objective_var, all);
  objective::sgd_update(params, grads, training, lr, opt);
  return out;
}

}  // namespace

TrainResult train(const Scenario& scenario, const Dataset& source, const Dataset& target,
                  const Dataset* validation, const net::ModelConfig& model,
                  const objective::TrainingConfig& training) {
  model.validate();
  training.validate();
  check_domain(source, Domain::source, "source");
  check_domain(target, Domain::target, "target");
  if (validation) check_domain(*validation, Domain::target, "validation");

  const LabelAccess access(scenario);
  const EpochPlanner planner(scenario, source, target, training.batch_size);

  TrainResult result;
  result.params = net::init_params(model);
  net::ModelParams best = result.params;
  double best_score = -std::numeric_limits<double>::infinity();
  objective::OptimizerState opt;

  for (std::size_t epoch = 0; epoch < training.max_epochs; ++epoch) {
    const double lambda = scenario.adversarial ? training.lambda_at(epoch) : 0.0;
    const double lr = training.lr_at(epoch);
    const auto steps = planner.plan(epoch, training.seed);

    double sum_s = 0.0, sum_t = 0.0, sum_d = 0.0;
    for (const auto& step : steps) {
      const StepLosses l = run_step(scenario, access, step, source, target, model, result.params,
                                    training, lambda, lr, opt);
      if (!std::isfinite(l.source) || !std::isfinite(l.target) || !std::isfinite(l.domain)) {
        throw TrainingError(epoch, "non-finite training loss");
      }
      sum_s += l.source;
      sum_t += l.target;
      sum_d += l.domain;
    }
    if (!result.params.all_finite()) throw TrainingError(epoch, "non-finite parameters");

    EpochRecord rec;
    const double n = static_cast<double>(steps.size());
    rec.losses.epoch = epoch;
    rec.losses.lambda = lambda;
    rec.losses.source = sum_s / n;
    rec.losses.target = sum_t / n;
    rec.losses.domain = sum_d / n;
    rec.losses.total =
        objective::total_loss(rec.losses.source, rec.losses.target, rec.losses.domain, lambda);

    if (validation && !validation->bags.empty()) {
      const auto preds = predict(result.params, model, *validation, scenario.eval_head);
      const auto m = metrics::evaluate(preds, *validation, metrics::EvalMode::frame);
      rec.validation_pcc = m.pcc;
      const double score = frame_pcc_or_floor(m);
      if (score > best_score) {
        best_score = score;
        best = result.params;
        result.history.best_epoch = epoch;
      }
    } else {
      best = result.params;
      result.history.best_epoch = epoch;
    }
    result.history.epochs.push_back(rec);

    if (epoch - result.history.best_epoch >= training.patience) {
      result.history.early_stopped = true;
      break;
    }
  }
  result.params = std::move(best);
  return result;
}

TrainResult train_wsda(const Dataset& source, const Dataset& target, const net::ModelConfig& model,
                       const objective::TrainingConfig& training, const Dataset* validation) {
  return train(Scenario::make(ScenarioKind::wsda), source, target, validation, model, training);
}

metrics::Predictions predict(const net::ModelParams& params, const net::ModelConfig& model,
                             const Dataset& dataset, Head head) {
  metrics::Predictions out;
  out.reserve(dataset.bags.size());
  for (const auto& bag : dataset.bags) {
    metrics::BagPrediction bp;
    for (const auto& inst : bag.instances) {
      Tape tape;
      const net::BoundParams bound = net::bind(tape, params);
      Var feats = net::features(model, bound.f, tape.constant(inst.window));
      Var y = head == Head::label ? net::label_head(bound.l, feats) : net::weak_head(bound.wl, feats);
      bp.push_back(y.value().values());
    }
    out.push_back(std::move(bp));
  }
  return out;
}

double domain_accuracy(const net::ModelParams& params, const net::ModelConfig& model,
                       const Dataset& source, const Dataset& target) {
  std::size_t correct = 0, total = 0;
  for (const Dataset* ds : {&source, &target}) {
    for (const auto& bag : ds->bags) {
      for (const auto& inst : bag.instances) {
        Tape tape;
        const net::BoundParams bound = net::bind(tape, params);
        Var feats = net::features(model, bound.f, tape.constant(inst.window));
        const double logit = net::domain_head(bound.d, feats, 0.0).value().item();
        const bool says_target = logit > 0.0;
        if (says_target == (bag.domain == Domain::target)) ++correct;
        ++total;
      }
    }
  }
  if (total == 0) throw ProtocolError("domain accuracy over zero windows");
  return static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

Dataset prepare_target(const Scenario& sc, const Dataset& train, std::size_t bag_length) {
  Dataset out = sc.reads_target_frame_labels() ? data::annotate_frames(train)
                                               : data::strip_frame_labels(train);
  if (sc.target_weak_loss && bag_length > 0) out = data::reduce_annotation(out, bag_length);
  return out;
}

}  // namespace

ScenarioResult run_scenario(const Scenario& scenario, const Dataset& source, const Dataset& target,
                            const ExperimentConfig& config) {
  check_domain(source, Domain::source, "source");
  check_domain(target, Domain::target, "target");
  std::vector<std::string> folds;
  if (config.full_loso) {
    folds = target.subjects();
  } else if (!config.test_subject.empty()) {
    folds = {config.test_subject};
  } else {
    const auto subjects = target.subjects();
    if (subjects.empty()) throw ProtocolError("target dataset has no subjects");
    folds = {subjects.front()};
  }

  ScenarioResult result;
  result.scenario = scenario;
  Dataset pooled;
  pooled.spec = target.spec;
  metrics::Predictions pooled_preds;
  for (const auto& subject : folds) {
    const auto split = data::loso_split(target, subject, config.training.seed);
    const Dataset train_target = prepare_target(scenario, split.train, config.bag_length);
    const Dataset* val = split.validation.bags.empty() ? nullptr : &split.validation;
    result.run = train(scenario, source, train_target, val, config.model, config.training);
    auto preds = predict(result.run.params, config.model, split.test, scenario.eval_head);
    pooled.bags.insert(pooled.bags.end(), split.test.bags.begin(), split.test.bags.end());
    pooled_preds.insert(pooled_preds.end(), preds.begin(), preds.end());
  }
  result.report = metrics::evaluate_report(pooled_preds, pooled);
  result.traces = metrics::frame_traces(pooled_preds, pooled);
  return result;
}

std::vector<SweepRow> annotation_sweep(const Dataset& source, const Dataset& target,
                                       const std::vector<std::size_t>& bag_lengths,
                                       const ExperimentConfig& config) {
  const auto wsda = Scenario::make(ScenarioKind::wsda);
  std::vector<SweepRow> rows;
  for (std::size_t len : bag_lengths) {
    if (len == 0) throw WindowingError("bag length must be >= 1");
    ExperimentConfig c = config;
    c.bag_length = len;
    const auto r = run_scenario(wsda, source, target, c);
    rows.push_back({len, r.report.frame.pcc, r.report});
  }
  return rows;
}

}  // namespace wsda::train
