#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "confab/package.hpp"
#include "confab/result.hpp"
#include "confab/types.hpp"

namespace confab {

// ---------------------------------------------------------------------------
// Rollout strategies
// ---------------------------------------------------------------------------
//   pull — device agents poll on their own period and fetch pending packages
//   push — the broker transmits up to origin_fanout packages per tick
//   seed — broker plus every delivered-and-eligible device retransmit to
//          peers still pending, BitTorrent style at whole-package granularity

enum class StrategyKind { Pull, Push, Seed };

const char* strategy_kind_name(StrategyKind k);
Result<StrategyKind> strategy_kind_from_name(const std::string& name);

struct Strategy {
  StrategyKind kind = StrategyKind::Push;
  Tick poll_period = 5;   // pull
  long origin_fanout = 1; // push, seed
  long seeder_fanout = 1; // seed
  double min_seed_charge_pct = 50.0;
  long min_seed_cores = 2;

  Json to_json() const;
  static Result<Strategy> from_json(const Json& j);
};

// What the rollout engine needs to know about the fleet; implemented by the
// simulator (and by stubs in tests).
class FleetView {
public:
  virtual ~FleetView() = default;
  virtual bool online(const DeviceId& id) const = 0;
  // Online, not dropping messages, and the auth token handshake passed.
  virtual bool accepts_transfer(const DeviceId& id) const = 0;
  virtual double charge_pct(const DeviceId& id) const = 0;
  virtual std::string power_supply(const DeviceId& id) const = 0;
  virtual long cores(const DeviceId& id) const = 0;
  virtual Tick poll_phase(const DeviceId& id, Tick poll_period) const = 0;
};

// Deterministic default poll phase: device id hash mod period.
Tick default_poll_phase(const DeviceId& id, Tick poll_period);

enum class DeliveryStatus { Pending, Deferred, InTransit, Delivered, Executed, Failed, Expired };

const char* delivery_status_name(DeliveryStatus s);

struct DeliveryReceipt {
  DeviceId device_id;
  PackageId package_id;
  Tick delivered_at = -1;
  std::optional<Tick> executed_at;
  bool success = false;
  std::string detail;

  Json to_json() const;
};

struct PlanDevice {
  PackageId package_id;
  DeliveryStatus status = DeliveryStatus::Pending;
  Tick delivered_at = -1;
  double required_charge_pct = 0.0;
  bool interrupt_allowed = true;
  Tick latest_shipping_time = 0;
  size_t package_bytes = 0;
  int exec_attempts = 0;
  std::string detail;
};

struct TransmissionPlan {
  RolloutId rollout_id;
  CommissionId commission_id;
  Strategy strategy;
  Tick created_at = 0;
  std::map<DeviceId, PlanDevice> devices;
  std::map<DeviceId, DeliveryReceipt> receipts;

  bool done() const;
  Json to_json() const;
};

struct TransferRecord {
  Tick tick = 0;
  RolloutId rollout_id;
  std::string sender; // "origin" or a seeding device id
  DeviceId receiver;
  PackageId package_id;
  size_t bytes = 0;
};

// ---------------------------------------------------------------------------
// RolloutEngine
// ---------------------------------------------------------------------------

class RolloutEngine {
public:
  struct StatusChange {
    RolloutId rollout_id;
    CommissionId commission_id;
    DeviceId device_id;
    DeliveryStatus status;
    std::string detail;
  };

  struct AdvanceResult {
    std::vector<TransferRecord> transfers;
    std::vector<StatusChange> changes; // deliveries, deferrals, expiries
  };

  // Builds the assignment map. Devices already past their package's latest
  // shipping time expire immediately; under-charged devices start deferred.
  Result<RolloutId> plan_rollout(const std::vector<ConfigurationPackage>& packages,
                                 const Strategy& strategy, Tick now,
                                 const CommissionId& commission_id,
                                 const FleetView& fleet);

  // One transfer round across all active plans. Transfers start the tick
  // after plan creation; a device receives its package at most once.
  AdvanceResult advance_all(Tick now, const FleetView& fleet);

  // Devices whose packages were delivered strictly before `now` and are not
  // yet executed, in deterministic (device, package) order.
  struct PendingExecution {
    RolloutId rollout_id;
    CommissionId commission_id;
    DeviceId device_id;
    PackageId package_id;
    bool interrupt_allowed = true;
  };
  std::vector<PendingExecution> pending_executions(Tick now) const;

  // Execution outcome from the device agent. Failures retry until the budget
  // is exhausted, then the device ends Failed.
  struct ExecutionOutcome {
    DeliveryStatus status = DeliveryStatus::Executed;
    DeliveryReceipt receipt;
  };
  Result<ExecutionOutcome> record_execution(const RolloutId& rollout, const DeviceId& device,
                                            Tick now, bool success, const std::string& detail,
                                            int retry_budget);

  // Seeder set for a plan at `now`: holders of the package that are online,
  // computationally able (cores) and power-eligible (mains or charged).
  std::set<DeviceId> select_seeders(const TransmissionPlan& plan, Tick now,
                                    const FleetView& fleet) const;

  const TransmissionPlan* find(const RolloutId& id) const;
  std::vector<const TransmissionPlan*> all_plans() const;
  const std::vector<TransferRecord>& transfer_log() const { return transfer_log_; }
  bool all_done() const;

  Json save() const;
  Status restore(const Json& j);

private:
  AdvanceResult advance_plan(TransmissionPlan& plan, Tick now, const FleetView& fleet);

  std::map<RolloutId, TransmissionPlan> plans_;
  std::vector<TransferRecord> transfer_log_;
  long seq_ = 0;
};

} // namespace confab
