#pragma once

#include <string>
#include <vector>

#include "confab/commission.hpp"
#include "confab/constraint.hpp"
#include "confab/package.hpp"
#include "confab/registry.hpp"
#include "confab/result.hpp"
#include "confab/stores.hpp"

namespace confab {

// The four factory inputs: commission (requirements interface), device state
// (registry), business scenarios (scenario catalog), transformation
// components (artifact store) — plus the device platform/os context read from
// its description. Serializable so a build can be reproduced elsewhere.
struct FactoryInputs {
  Commission commission;
  DeviceState device_state;
  std::vector<BusinessScenario> scenarios;
  std::vector<TransformationComponent> components; // one per post-condition, in order
  std::string platform;    // device class id
  std::string os_platform;
  std::string os_version;

  Json to_json() const;
  static Result<FactoryInputs> from_json(const Json& j);
};

struct BuildSettings {
  double required_charge_pct = 30.0;
  bool interrupt_allowed = true;
  long importance_max = 10;
  Tick shipping_budget = 20;
  std::string mac_secret = "confab-shared-secret";

  Json to_json() const;
  static Result<BuildSettings> from_json(const Json& j);
};

// Importance terciles over [0, importance_max] map to low/normal/critical.
Criticality criticality_for(long importance, long importance_max);

struct PrecheckResult {
  bool no_op_candidate = false; // post-conditions already satisfied
};

struct BuildProduct {
  ConfigurationPackage package;
  Snapshot pre_snapshot;
};

class Factory {
public:
  Factory(const DeviceRegistry& registry, const CommissionLedger& ledger,
          const ScenarioCatalog& catalog, const ArtifactStore& artifacts,
          BuildSettings settings)
      : registry_(&registry), ledger_(&ledger), catalog_(&catalog),
        artifacts_(&artifacts), settings_(std::move(settings)) {}

  // Collects all four inputs, requiring a fresh device state and a
  // transformation component for every post-condition of the device's
  // platform and os.
  Result<FactoryInputs> gather_inputs(const CommissionId& commission_id,
                                      const DeviceId& device_id, Tick now) const;

  const BuildSettings& settings() const { return settings_; }

  // Satisfiability of each post-condition against the gathered state:
  // variation point exists, value inside its domain, device online.
  static Result<PrecheckResult> check_preconditions(const FactoryInputs& inputs,
                                                    const OrganisationalFeatureModel& ofm);

  // Pure function of (inputs, now, settings): renders each post-condition
  // through its transformation component in commission order, appends verify
  // instructions, attaches shipping metadata and the pre-build snapshot, and
  // seals the package. Identical inputs yield byte-identical packages.
  static Result<BuildProduct> build(const FactoryInputs& inputs, Tick now,
                                    const BuildSettings& settings);

private:
  const DeviceRegistry* registry_;
  const CommissionLedger* ledger_;
  const ScenarioCatalog* catalog_;
  const ArtifactStore* artifacts_;
  BuildSettings settings_;
};

} // namespace confab
