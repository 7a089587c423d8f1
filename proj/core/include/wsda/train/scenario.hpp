#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "wsda/data/dataset.hpp"

namespace wsda::train {

enum class ScenarioKind { source_only, target_only, source_union_target, uda, wsda, sda };

/// Head whose outputs become the target-domain predictions.
enum class Head { label, weak };

/// Which losses a training run optimises and which labels it may read.
struct Scenario {
  ScenarioKind kind = ScenarioKind::wsda;
  bool source_loss = false;        // L_S on source frame labels through G_l
  bool target_frame_loss = false;  // frame-level target loss through G_l (reported as L_T)
  bool target_weak_loss = false;   // bag-max target loss through G_wl (reported as L_T)
  bool adversarial = false;        // L_d through the gradient reversal layer
  /// G_l for every kind; G_wl yields only one value per window.
  Head eval_head = Head::label;

  bool uses_source() const { return source_loss || adversarial; }
  bool uses_target() const { return target_frame_loss || target_weak_loss || adversarial; }
  bool reads_target_frame_labels() const { return target_frame_loss; }
  bool reads_target_weak_labels() const { return target_weak_loss; }

  static Scenario make(ScenarioKind kind);
  static Scenario parse(std::string_view name);
  std::string name() const;
};

std::string scenario_name(ScenarioKind kind);
const std::vector<ScenarioKind>& all_scenarios();

/// Data-access guard: every label read during training goes through here and
/// reading a label the scenario may not see is a ProtocolError.
class LabelAccess {
 public:
  explicit LabelAccess(const Scenario& scenario) : scenario_(scenario) {}

  const std::vector<double>& frame_labels(const data::Bag& bag, const data::Instance& inst) const;
  double weak_label(const data::Bag& bag) const;

 private:
  Scenario scenario_;
};

}  // namespace wsda::train
