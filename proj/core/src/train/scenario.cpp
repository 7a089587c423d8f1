#include "wsda/train/scenario.hpp"

#include "wsda/error.hpp"

namespace wsda::train {

Scenario Scenario::make(ScenarioKind kind) {
  Scenario s;
  s.kind = kind;
  switch (kind) {
    case ScenarioKind::source_only:
      s.source_loss = true;
      break;
    case ScenarioKind::target_only:
      s.target_frame_loss = true;
      break;
    case ScenarioKind::source_union_target:
      s.source_loss = true;
      s.target_frame_loss = true;
      break;
    case ScenarioKind::uda:
      s.source_loss = true;
      s.adversarial = true;
      break;
    case ScenarioKind::wsda:
      s.source_loss = true;
      s.target_weak_loss = true;
      s.adversarial = true;
      break;
    case ScenarioKind::sda:
      s.source_loss = true;
      s.target_frame_loss = true;
      s.adversarial = true;
      break;
  }
  return s;
}

std::string scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::source_only: return "source_only";
    case ScenarioKind::target_only: return "target_only";
    case ScenarioKind::source_union_target: return "source_union_target";
    case ScenarioKind::uda: return "uda";
    case ScenarioKind::wsda: return "wsda";
    case ScenarioKind::sda: return "sda";
  }
  return "unknown";
}

const std::vector<ScenarioKind>& all_scenarios() {
  static const std::vector<ScenarioKind> kinds{
      ScenarioKind::source_only, ScenarioKind::target_only, ScenarioKind::source_union_target,
      ScenarioKind::uda,         ScenarioKind::wsda,        ScenarioKind::sda};
  return kinds;
}

Scenario Scenario::parse(std::string_view name) {
  for (ScenarioKind k : all_scenarios()) {
    if (scenario_name(k) == name) return make(k);
  }
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

std::string Scenario::name() const { return scenario_name(kind); }

const std::vector<double>& LabelAccess::frame_labels(const data::Bag& bag,
                                                     const data::Instance& inst) const {
  const bool allowed = bag.domain == data::Domain::source ? scenario_.source_loss
                                                          : scenario_.reads_target_frame_labels();
  if (!allowed) {
    throw ProtocolError("scenario " + scenario_.name() + " may not read frame labels of " +
                        data::domain_name(bag.domain) + " bag '" + bag.id + "'");
  }
  if (inst.frame_labels.empty()) {
    throw ProtocolError("bag '" + bag.id + "' window " + std::to_string(inst.window_index) +
                        " has no frame labels");
  }
  return inst.frame_labels;
}

double LabelAccess::weak_label(const data::Bag& bag) const {
  if (bag.domain != data::Domain::target || !scenario_.reads_target_weak_labels()) {
    throw ProtocolError("scenario " + scenario_.name() + " may not read the weak label of bag '" +
                        bag.id + "'");
  }
  return bag.label;
}

}  // namespace wsda::train
