#include "confab/factory.hpp"

#include <algorithm>
#include <sstream>

#include "confab/digest.hpp"
#include "confab/scheduler.hpp"

namespace confab {

Json FactoryInputs::to_json() const {
  Json scenarios_json = Json::array();
  for (const auto& s : scenarios) scenarios_json.push_back(s.to_json());
  Json components_json = Json::array();
  for (const auto& c : components) components_json.push_back(c.to_json());
  return Json{{"commission", commission.to_json()},
              {"device_state", device_state.to_json()},
              {"scenarios", scenarios_json},
              {"components", components_json},
              {"platform", platform},
              {"os_platform", os_platform},
              {"os_version", os_version}};
}

Result<FactoryInputs> FactoryInputs::from_json(const Json& j) {
  FactoryInputs in;
  auto c = Commission::from_json(j.at("commission"));
  if (!c.ok()) return c.error();
  in.commission = c.value();
  auto s = DeviceState::from_json(j.at("device_state"));
  if (!s.ok()) return s.error();
  in.device_state = s.value();
  for (const auto& sj : j.value("scenarios", Json::array())) {
    auto scenario = BusinessScenario::from_json(sj);
    if (!scenario.ok()) return scenario.error();
    in.scenarios.push_back(scenario.value());
  }
  for (const auto& cj : j.value("components", Json::array())) {
    auto comp = TransformationComponent::from_json(cj);
    if (!comp.ok()) return comp.error();
    in.components.push_back(comp.value());
  }
  in.platform = j.value("platform", "");
  in.os_platform = j.value("os_platform", "");
  in.os_version = j.value("os_version", "");
  return in;
}

Json BuildSettings::to_json() const {
  return Json{{"required_charge_pct", required_charge_pct},
              {"interrupt_allowed", interrupt_allowed},
              {"importance_max", importance_max},
              {"shipping_budget", shipping_budget},
              {"mac_secret", mac_secret}};
}

Result<BuildSettings> BuildSettings::from_json(const Json& j) {
  BuildSettings s;
  s.required_charge_pct = j.value("required_charge_pct", s.required_charge_pct);
  s.interrupt_allowed = j.value("interrupt_allowed", s.interrupt_allowed);
  s.importance_max = j.value("importance_max", s.importance_max);
  s.shipping_budget = j.value("shipping_budget", s.shipping_budget);
  s.mac_secret = j.value("mac_secret", s.mac_secret);
  return s;
}

Criticality criticality_for(long importance, long importance_max) {
  if (importance_max < 1) importance_max = 1;
  if (importance >= importance_max) return Criticality::Critical;
  if (3 * importance < importance_max) return Criticality::Low;
  if (3 * importance < 2 * importance_max) return Criticality::Normal;
  return Criticality::Critical;
}

Result<FactoryInputs> Factory::gather_inputs(const CommissionId& commission_id,
                                             const DeviceId& device_id, Tick now) const {
  const CommissionRecord* rec = ledger_->find(commission_id);
  if (rec == nullptr) {
    return make_error("not-found", "unknown commission: " + commission_id);
  }
  if (rec->devices.count(device_id) == 0) {
    return make_error("gather-failed", "commission " + commission_id +
                                           " does not target device " + device_id);
  }

  auto fresh = registry_->get_state(device_id, now);
  if (!fresh.ok()) return fresh.error();
  if (!fresh.value().fresh) {
    return make_error("gather-failed(stale)",
                      "state of " + device_id + " is stale (last report tick " +
                          std::to_string(fresh.value().state.last_updated) + ")");
  }

  auto desc = registry_->get_description(device_id);
  if (!desc.ok()) return desc.error();
  const Json* osp = desc.value().field("capabilities/os/platform");
  const Json* osv = desc.value().field("capabilities/os/version");
  if (osp == nullptr || osv == nullptr || !osp->is_string() || !osv->is_string()) {
    return make_error("gather-failed", "device description lacks os platform/version");
  }
  auto os_version = Version::parse(osv->get<std::string>());
  if (!os_version.ok()) {
    return make_error("gather-failed", "unparsable os version: " + osv->get<std::string>());
  }

  FactoryInputs inputs;
  inputs.commission = rec->commission;
  inputs.device_state = fresh.value().state;
  inputs.platform = desc.value().class_id;
  inputs.os_platform = osp->get<std::string>();
  inputs.os_version = osv->get<std::string>();
  for (const BusinessScenario* s : catalog_->scenarios_for(device_id)) {
    inputs.scenarios.push_back(*s);
  }

  for (const auto& pc : rec->commission.required) {
    ComponentKey key;
    key.kind = pc.kind == PostCondition::Kind::SetValue ? "set-value" : "provide-service";
    key.name = pc.kind == PostCondition::Kind::SetValue ? pc.path : pc.service;
    key.platform = inputs.platform;
    key.os_platform = inputs.os_platform;
    auto component = artifacts_->resolve_component(key, os_version.value());
    if (!component.ok()) {
      return make_error("gather-failed(no-transform)",
                        "no transformation component for key " + key.to_string() +
                            " os " + inputs.os_version);
    }
    inputs.components.push_back(component.value());
  }
  return inputs;
}

Result<PrecheckResult> Factory::check_preconditions(const FactoryInputs& inputs,
                                                    const OrganisationalFeatureModel& ofm) {
  if (!inputs.device_state.online) {
    return make_error("mismatch(offline)", "device " + inputs.device_state.device_id +
                                               " is offline");
  }
  for (const auto& pc : inputs.commission.required) {
    if (pc.kind == PostCondition::Kind::SetValue) {
      const VariationPoint* vp = ofm.find_point(pc.path);
      if (vp == nullptr) {
        return make_error("mismatch(path)", "no variation point at " + pc.path);
      }
      if (vp->access == Access::ReadOnly || vp->invariant) {
        return make_error("mismatch(invariant)",
                          "post-condition targets protected point " + pc.path);
      }
      if (!vp->domain.contains(pc.value)) {
        return make_error("mismatch(domain)", "value " + canonical_compact(pc.value) +
                                                  " outside domain of " + pc.path);
      }
      if (inputs.device_state.current_values.count(pc.path) == 0) {
        return make_error("mismatch(path)", "state lacks configurable point " + pc.path);
      }
    } else {
      if (pc.min_level < 0 || pc.min_level > 10) {
        return make_error("mismatch(level)", "service level outside [0,10]");
      }
    }
  }

  // Already satisfied? Compare the projected state field-by-field.
  PrecheckResult result;
  auto projected = apply_post_conditions(inputs.device_state, inputs.commission, ofm);
  if (projected.ok()) {
    const DeviceState& p = projected.value();
    result.no_op_candidate = p.current_values == inputs.device_state.current_values &&
                             p.provided_services == inputs.device_state.provided_services;
  }
  return result;
}

namespace {

Result<std::string> substitute_text(const std::string& text,
                                    const std::map<std::string, Json>& bindings) {
  std::string out;
  size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find("{{", pos);
    if (open == std::string::npos) {
      out += text.substr(pos);
      break;
    }
    auto close = text.find("}}", open);
    if (close == std::string::npos) {
      return make_error("build-failed(template)", "unterminated placeholder in: " + text);
    }
    out += text.substr(pos, open - pos);
    std::string token = text.substr(open + 2, close - open - 2);
    auto it = bindings.find(token);
    if (it == bindings.end()) {
      return make_error("build-failed(template)", "unresolvable placeholder {{" + token + "}}");
    }
    if (it->second.is_string()) {
      out += it->second.get_ref<const std::string&>();
    } else {
      out += canonical_compact(it->second);
    }
    pos = close + 2;
  }
  return out;
}

// Replaces placeholders inside a template node. A string that is exactly one
// placeholder takes the bound value with its type; embedded placeholders
// substitute textually.
Result<Json> render_node(const Json& node, const std::map<std::string, Json>& bindings) {
  if (node.is_string()) {
    const std::string& text = node.get_ref<const std::string&>();
    if (text.size() > 4 && text.rfind("{{", 0) == 0 &&
        text.compare(text.size() - 2, 2, "}}") == 0 &&
        text.find("{{", 2) == std::string::npos) {
      std::string token = text.substr(2, text.size() - 4);
      auto it = bindings.find(token);
      if (it == bindings.end()) {
        return make_error("build-failed(template)", "unresolvable placeholder {{" + token + "}}");
      }
      return it->second;
    }
    auto substituted = substitute_text(text, bindings);
    if (!substituted.ok()) return substituted.error();
    return Json(substituted.value());
  }
  if (node.is_object()) {
    Json out = Json::object();
    for (auto it = node.begin(); it != node.end(); ++it) {
      auto rendered = render_node(it.value(), bindings);
      if (!rendered.ok()) return rendered;
      out[it.key()] = rendered.value();
    }
    return out;
  }
  if (node.is_array()) {
    Json out = Json::array();
    for (const auto& e : node) {
      auto rendered = render_node(e, bindings);
      if (!rendered.ok()) return rendered;
      out.push_back(rendered.value());
    }
    return out;
  }
  return node;
}

} // namespace

Result<BuildProduct> Factory::build(const FactoryInputs& inputs, Tick now,
                                    const BuildSettings& settings) {
  const Commission& c = inputs.commission;
  if (inputs.components.size() != c.required.size()) {
    return make_error("build-failed(template)",
                      "component list does not match post-conditions");
  }

  BuildProduct product;

  // Pre-build snapshot of the device's configurable values.
  Snapshot& snap = product.pre_snapshot;
  snap.device_id = inputs.device_state.device_id;
  snap.values = inputs.device_state.current_values;
  snap.taken_at = now;
  {
    Json ident{{"device", snap.device_id},
               {"values", Json(snap.values)},
               {"taken_at", snap.taken_at}};
    snap.snapshot_id = "snap-" + sha256_hex(canonical_compact(ident)).substr(0, 16);
  }

  ConfigurationArtifact artifact;
  for (size_t i = 0; i < c.required.size(); ++i) {
    const PostCondition& pc = c.required[i];
    const TransformationComponent& component = inputs.components[i];

    std::map<std::string, Json> bindings;
    bindings["device_id"] = inputs.device_state.device_id;
    bindings["platform"] = inputs.platform;
    bindings["os_platform"] = inputs.os_platform;
    bindings["os_version"] = inputs.os_version;
    if (pc.kind == PostCondition::Kind::SetValue) {
      bindings["path"] = pc.path;
      bindings["value"] = pc.value;
    } else {
      bindings["service"] = pc.service;
      bindings["min_level"] = pc.min_level;
    }

    for (const auto& tpl : component.instruction_templates) {
      auto rendered = render_node(tpl, bindings);
      if (!rendered.ok()) return rendered.error();
      auto instruction = Instruction::from_json(rendered.value());
      if (!instruction.ok()) {
        return make_error("build-failed(template)",
                          "template renders to malformed instruction: " +
                              instruction.error().message);
      }
      artifact.instructions.push_back(instruction.value());
    }
  }

  // Every post-condition gets a closing verify instruction, in order.
  for (const auto& pc : c.required) {
    Instruction verify;
    verify.op = Instruction::Op::Verify;
    if (pc.kind == PostCondition::Kind::SetValue) {
      verify.path = pc.path;
      verify.value = pc.value;
    } else {
      verify.service = pc.service;
      verify.min_level = pc.min_level;
    }
    artifact.instructions.push_back(std::move(verify));
  }

  ShippingMetadata metadata;
  metadata.required_charge_pct = settings.required_charge_pct;
  metadata.interrupt_allowed = settings.interrupt_allowed;
  metadata.criticality = criticality_for(c.importance, settings.importance_max);
  metadata.latest_shipping_time = std::min(c.window.latest, now + settings.shipping_budget);

  ConfigurationPackage& pkg = product.package;
  pkg.commission_id = c.commission_id;
  pkg.device_id = inputs.device_state.device_id;
  pkg.artifact = std::move(artifact);
  pkg.metadata = metadata;
  pkg.pre_snapshot_ref = snap.snapshot_id;
  {
    Json ident{{"inputs", inputs.to_json()}, {"now", now}};
    pkg.package_id = "pkg-" + sha256_hex(canonical_compact(ident)).substr(0, 16);
  }
  pkg.seal(settings.mac_secret);
  return product;
}

} // namespace confab
