#include "confab/registry.hpp"

namespace confab {

Result<DeviceId> DeviceRegistry::register_device(const DeviceDescription& desc,
                                                 const DeviceState& initial, Tick now) {
  if (entries_.count(desc.device_id) > 0) {
    return make_error("conflict", "device already registered: " + desc.device_id);
  }
  if (initial.device_id != desc.device_id) {
    return make_error("validation", "state/description device id mismatch");
  }
  auto report = validate_description(desc, *ofm_);
  if (!report.ok()) return report.error();
  if (!report.value().empty()) {
    return make_error("validation", "description invalid: " + report_to_string(report.value()));
  }
  auto state_report = validate_state(initial, *ofm_);
  if (!state_report.ok()) return state_report.error();
  if (!state_report.value().empty()) {
    return make_error("validation", "initial state invalid: " + report_to_string(state_report.value()));
  }
  RegistryEntry entry{desc, initial, default_staleness_};
  entry.state.last_updated = now;
  entries_.emplace(desc.device_id, std::move(entry));
  return desc.device_id;
}

Result<Tick> DeviceRegistry::update_state(const DeviceId& id, DeviceState new_state) {
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    return make_error("not-found", "device not registered: " + id);
  }
  if (new_state.device_id != id) {
    return make_error("validation", "state carries wrong device id");
  }
  if (new_state.last_updated < it->second.state.last_updated) {
    return make_error("stale", "write at tick " + std::to_string(new_state.last_updated) +
                                   " behind stored tick " +
                                   std::to_string(it->second.state.last_updated));
  }
  auto report = validate_state(new_state, *ofm_);
  if (!report.ok()) return report.error();
  if (!report.value().empty()) {
    return make_error("validation", "state invalid: " + report_to_string(report.value()));
  }
  Tick accepted = new_state.last_updated;
  it->second.state = std::move(new_state);
  return accepted;
}

Result<FreshState> DeviceRegistry::get_state(const DeviceId& id, Tick now) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    return make_error("not-found", "device not registered: " + id);
  }
  FreshState out;
  out.state = it->second.state;
  out.fresh = (now - it->second.state.last_updated) <= it->second.staleness_threshold;
  return out;
}

Result<DeviceDescription> DeviceRegistry::get_description(const DeviceId& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    return make_error("not-found", "device not registered: " + id);
  }
  return it->second.description;
}

std::vector<DeviceId> DeviceRegistry::device_ids() const {
  std::vector<DeviceId> out;
  out.reserve(entries_.size());
  for (const auto& [id, entry] : entries_) {
    (void)entry;
    out.push_back(id);
  }
  return out;
}

void DeviceRegistry::set_staleness_threshold(const DeviceId& id, Tick threshold) {
  auto it = entries_.find(id);
  if (it != entries_.end()) it->second.staleness_threshold = threshold;
}

Status ScenarioCatalog::add_scenario(BusinessScenario scenario, const DeviceRegistry& registry) {
  if (scenario.member_devices.empty()) {
    return make_error("validation", "scenario member set empty: " + scenario.scenario_id);
  }
  if (scenarios_.count(scenario.scenario_id) > 0) {
    return make_error("conflict", "scenario already present: " + scenario.scenario_id);
  }
  for (const auto& d : scenario.member_devices) {
    if (!registry.has_device(d)) {
      return make_error("validation",
                        "scenario " + scenario.scenario_id + " references unregistered device " + d);
    }
  }
  scenarios_.emplace(scenario.scenario_id, std::move(scenario));
  return Status::ok_status();
}

const BusinessScenario* ScenarioCatalog::find(const ScenarioId& id) const {
  auto it = scenarios_.find(id);
  return it == scenarios_.end() ? nullptr : &it->second;
}

std::vector<const BusinessScenario*> ScenarioCatalog::scenarios_for(const DeviceId& id) const {
  std::vector<const BusinessScenario*> out;
  for (const auto& [sid, scenario] : scenarios_) {
    (void)sid;
    if (scenario.member_devices.count(id) > 0) out.push_back(&scenario);
  }
  return out;
}

} // namespace confab
