#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "confab/constraint.hpp"
#include "confab/device_model.hpp"
#include "confab/result.hpp"

namespace confab {

struct RegistryEntry {
  DeviceDescription description;
  DeviceState state;
  Tick staleness_threshold = 30;
};

struct FreshState {
  DeviceState state;
  bool fresh = false;
};

// The device state ledger. Descriptions are static per run; states are
// replaced whole on every accepted report, last-writer-wins keyed by tick.
// Mutations are expected from a single orchestration thread; reads hand out
// copies.
class DeviceRegistry {
public:
  explicit DeviceRegistry(const OrganisationalFeatureModel& ofm,
                          Tick default_staleness = 30)
      : ofm_(&ofm), default_staleness_(default_staleness) {}

  Result<DeviceId> register_device(const DeviceDescription& desc,
                                   const DeviceState& initial, Tick now);

  // Replaces the stored state. Writes with last_updated before the stored
  // tick are rejected as stale.
  Result<Tick> update_state(const DeviceId& id, DeviceState new_state);

  Result<FreshState> get_state(const DeviceId& id, Tick now) const;
  Result<DeviceDescription> get_description(const DeviceId& id) const;

  bool has_device(const DeviceId& id) const { return entries_.count(id) > 0; }
  std::vector<DeviceId> device_ids() const;
  const OrganisationalFeatureModel& ofm() const { return *ofm_; }
  Tick default_staleness() const { return default_staleness_; }

  void set_staleness_threshold(const DeviceId& id, Tick threshold);

private:
  const OrganisationalFeatureModel* ofm_;
  Tick default_staleness_;
  std::map<DeviceId, RegistryEntry> entries_;
};

// Business scenario membership, static per run.
class ScenarioCatalog {
public:
  Status add_scenario(BusinessScenario scenario, const DeviceRegistry& registry);

  const BusinessScenario* find(const ScenarioId& id) const;

  // Scenarios whose member set contains the device, ordered by scenario_id.
  std::vector<const BusinessScenario*> scenarios_for(const DeviceId& id) const;

  const std::map<ScenarioId, BusinessScenario>& all() const { return scenarios_; }

private:
  std::map<ScenarioId, BusinessScenario> scenarios_;
};

} // namespace confab
