#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "confab/commission.hpp"
#include "confab/config.hpp"
#include "confab/constraint.hpp"
#include "confab/device_model.hpp"
#include "confab/events.hpp"
#include "confab/factory.hpp"
#include "confab/registry.hpp"
#include "confab/scheduler.hpp"
#include "confab/shipping.hpp"
#include "confab/stores.hpp"

namespace confab {

// ---------------------------------------------------------------------------
// Simulated devices
// ---------------------------------------------------------------------------

struct FaultSpec {
  Tick at = 0;
  std::string kind; // offline | drop-message | exec-fail
  Tick duration = 1;
};

struct RechargeSpec {
  Tick at = 0;
  double amount = 0.0;
};

// Optional duty cycle: the device counts as busy with its sensing/acting task
// during the first busy_len ticks of every period. Packages that may not
// interrupt wait for an idle tick.
struct DutyCycle {
  Tick period = 0; // 0 = never busy
  Tick busy_len = 0;
};

// Internal requirement source: when the watched field crosses the bound, the
// agent submits the commission template through the normal interface.
struct WatchRule {
  std::string path;
  std::optional<double> below;
  std::optional<double> above;
  Json commission_template;
  bool fired = false;
};

struct SimDevice {
  DeviceDescription description;
  DeviceState live; // ground truth; the registry sees it via reports

  Tick report_period = 10;
  Tick report_phase = 0;
  std::optional<Tick> poll_phase;           // default: hash of device id
  std::optional<Tick> staleness_threshold;  // default: deployment-wide value

  double idle_drain_pct_per_tick = 0.0;
  double exec_drain_pct = 0.0;
  double transfer_drain_pct = 0.0;

  std::vector<FaultSpec> faults;
  std::vector<RechargeSpec> recharges;
  DutyCycle duty;
  std::vector<WatchRule> watches;
  std::string auth_token; // empty = deployment token

  // Runtime fault windows (exclusive end tick).
  Tick offline_until = 0;
  Tick dropping_until = 0;
  Tick exec_fail_until = 0;

  bool is_mains() const;
  long cores() const;
  bool busy_at(Tick now) const;
};

struct FleetBootstrap {
  OrganisationalFeatureModel ofm;
  std::vector<SimDevice> devices;
  std::vector<BusinessScenario> scenarios;
};

// ---------------------------------------------------------------------------
// World: discrete-time orchestration loop
// ---------------------------------------------------------------------------
// Single-threaded by design. Tick phases, in fixed order:
//   1 faults and recharges      5 rollout advance
//   2 currency renewal          6 agent execution of delivered packages
//   3 commission intake         7 state reports
//   4 select + gate + build     8 revert emission
// After phase 8 every scenario constraint is audited against registry state;
// a violation aborts the run.

class World : public FleetView {
public:
  explicit World(RunConfig config);

  Status init(FleetBootstrap bootstrap);
  Status add_component(TransformationComponent component);

  // External submission at the current tick; picked up by intake next tick.
  Result<CommissionId> submit_commission(Commission c);
  // Scenario-run schedule: submit when the given tick begins.
  void schedule_commission(Tick at, Commission c);

  Status step();
  Status run_until(Tick end_tick);
  // Runs until no commission or rollout has work left (or max_ticks pass).
  Status run_to_quiescence(Tick max_ticks);
  bool quiescent() const;

  Tick now() const { return now_; }

  // FleetView for the rollout engine.
  bool online(const DeviceId& id) const override;
  bool accepts_transfer(const DeviceId& id) const override;
  double charge_pct(const DeviceId& id) const override;
  std::string power_supply(const DeviceId& id) const override;
  long cores(const DeviceId& id) const override;
  Tick poll_phase(const DeviceId& id, Tick poll_period) const override;

  const RunConfig& config() const { return config_; }
  const DeviceRegistry& registry() const { return registry_; }
  const ScenarioCatalog& catalog() const { return catalog_; }
  CommissionLedger& ledger() { return ledger_; }
  const CommissionLedger& ledger() const { return ledger_; }
  Scheduler& scheduler() { return scheduler_; }
  const RolloutEngine& rollouts() const { return rollouts_; }
  ConfigurationStore& store() { return store_; }
  const ArtifactStore& artifacts() const { return artifacts_; }
  const EventLog& events() const { return events_; }
  EventLog& events_mutable() { return events_; }
  const SimDevice* device(const DeviceId& id) const;
  SimDevice* device_mutable(const DeviceId& id);
  std::vector<DeviceId> device_ids() const;

  // Snapshot ids still needed for pending work or future reverts.
  std::set<SnapshotId> pinned_snapshots() const;

  // Test hook: re-run the safety gate right after every build and abort on
  // disagreement.
  void set_paranoid_gate_recheck(bool on) { paranoid_recheck_ = on; }

  // Workspace persistence across CLI invocations. Static structure (fleet,
  // ofm, components) comes from init(); this carries the mutable rest.
  Json save_state() const;
  Status restore_state(const Json& j);

private:
  void phase_faults();
  void phase_renewal();
  void phase_intake();
  void phase_schedule_and_build();
  void phase_rollout();
  void phase_execute();
  void phase_reports();
  void phase_reverts();
  Status audit();

  void expire_sweep();
  void handle_rollout_results(const RolloutEngine::AdvanceResult& result);
  // Execution of one delivered package on the device agent; transactional.
  struct ExecResult {
    bool success = false;
    std::string detail;
  };
  ExecResult execute_package(SimDevice& dev, const std::string& package_bytes);
  void push_report(SimDevice& dev);
  void drain(SimDevice& dev, double pct);
  void resolve_commission_if_done(const CommissionId& id, int phase);
  Strategy strategy_from_config() const;
  Policy policy_from_config() const;

  RunConfig config_;
  OrganisationalFeatureModel ofm_;
  DeviceRegistry registry_;
  ScenarioCatalog catalog_;
  CommissionLedger ledger_;
  Scheduler scheduler_;
  ArtifactStore artifacts_;
  ConfigurationStore store_;
  Factory factory_;
  RolloutEngine rollouts_;
  EventLog events_;

  std::map<DeviceId, SimDevice> devices_;
  std::multimap<Tick, Commission> scheduled_commissions_;
  std::set<DeviceId> pending_report_;
  Tick now_ = 0;
  int current_phase_ = 3; // intake, for submissions arriving between ticks
  bool initialized_ = false;
  bool paranoid_recheck_ = false;
};

// ---------------------------------------------------------------------------
// Document loading
// ---------------------------------------------------------------------------

Result<SimDevice> sim_device_from_json(const Json& j, const OrganisationalFeatureModel& ofm);
Result<FleetBootstrap> fleet_from_json(const Json& j);

struct ScenarioRun {
  RunConfig config;
  FleetBootstrap fleet;
  std::vector<std::pair<Tick, Commission>> schedule;
};

Result<ScenarioRun> scenario_run_from_json(const Json& j, const RunConfig& base);

} // namespace confab
