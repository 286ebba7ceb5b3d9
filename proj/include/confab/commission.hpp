#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "confab/canonical.hpp"
#include "confab/registry.hpp"
#include "confab/result.hpp"
#include "confab/types.hpp"

namespace confab {

// ---------------------------------------------------------------------------
// Commission: a four-dimensional configuration request
// (importance, time window, targets, required post-conditions).
// ---------------------------------------------------------------------------

struct PostCondition {
  enum class Kind { SetValue, ProvideService };
  Kind kind = Kind::SetValue;

  // SetValue
  std::string path;
  Json value;

  // ProvideService
  std::string service;
  int min_level = 1;

  Json to_json() const;
  static Result<PostCondition> from_json(const Json& j);
};

struct TimeWindow {
  Tick earliest = 0;
  Tick latest = 0;
};

struct Commission {
  CommissionId commission_id;
  std::string source;
  long importance = 0; // static priority value or market bid
  TimeWindow window;
  std::optional<Tick> revert_at;
  std::set<std::string> targets; // device ids and/or scenario ids
  std::vector<PostCondition> required;
  Tick submitted_at = 0;

  Json to_json() const;
  static Result<Commission> from_json(const Json& j);
};

enum class CommissionState {
  Submitted,
  Scheduled,
  Building,
  Shipping,
  Completed,
  Rejected,
  Expired,
  Reverted,
};

const char* commission_state_name(CommissionState s);
bool commission_state_terminal(CommissionState s);

struct StatusTransition {
  Tick tick = 0;
  CommissionState from = CommissionState::Submitted;
  CommissionState to = CommissionState::Submitted;
  std::string note;
};

// Per target device progress inside one commission.
enum class DeviceStage { Pending, Building, Shipping, Succeeded, Failed, Expired };

const char* device_stage_name(DeviceStage s);

struct DevicePipeline {
  DeviceStage stage = DeviceStage::Pending;
  SnapshotId pre_snapshot;
  PackageId package_id;
  std::string detail;
};

struct CommissionRecord {
  Commission commission;
  CommissionState state = CommissionState::Submitted;
  std::vector<StatusTransition> log;
  std::map<DeviceId, DevicePipeline> devices; // resolved target devices
  std::vector<std::string> notes;             // revert-impossible etc.
  std::set<CommissionId> pending_reverts;
  std::optional<CommissionId> revert_parent;
  bool reverts_fired = false;

  Json to_json() const;
  static Result<CommissionRecord> from_json(const Json& j);
};

// ---------------------------------------------------------------------------
// CommissionLedger: the requirements interface
// ---------------------------------------------------------------------------

// Expands device and scenario names into the covered device set. Unresolvable
// names are collected and reported together.
Result<std::set<DeviceId>> resolve_targets(const Commission& c,
                                           const DeviceRegistry& registry,
                                           const ScenarioCatalog& catalog);

class CommissionLedger {
public:
  CommissionLedger(const DeviceRegistry& registry, const ScenarioCatalog& catalog)
      : registry_(&registry), catalog_(&catalog) {}

  // Validates the four dimensions, resolves targets and records the
  // commission. Structural failures are recorded with a terminal state and
  // reported as errors.
  Result<CommissionId> submit(Commission c, Tick now);

  // Lifecycle transitions, driven by the orchestration loop (single writer).
  Status transition(const CommissionId& id, CommissionState to, Tick now,
                    const std::string& note = "");

  // Per-device pipeline updates.
  Status mark_device(const CommissionId& id, const DeviceId& device, DeviceStage stage,
                     const std::string& detail = "");
  Status set_device_refs(const CommissionId& id, const DeviceId& device,
                         const SnapshotId& snapshot, const PackageId& package);

  // Emits restore-to-snapshot commissions for a completed commission whose
  // revert_at equals `now`, one per succeeded target device. The loader maps
  // a snapshot id to its stored values; a missing snapshot produces a
  // revert-impossible note instead of a commission.
  using SnapshotLoader =
      std::function<Result<std::map<std::string, Json>>(const SnapshotId&)>;
  std::vector<Commission> emit_revert(const CommissionId& id, Tick now,
                                      const SnapshotLoader& loader, Tick revert_window);

  // Resolves the commission-wide state from per-device stages once no device
  // has work left. Returns true when a terminal transition fired.
  bool try_resolve(const CommissionId& id, Tick now);

  // Called when a revert child reaches completed; flips the parent to
  // reverted once all children are done.
  void note_revert_completed(const CommissionId& child, Tick now);
  void link_revert(const CommissionId& child, const CommissionId& parent);

  const CommissionRecord* find(const CommissionId& id) const;
  CommissionRecord* find_mutable(const CommissionId& id);
  std::vector<const CommissionRecord*> all() const;
  void add_note(const CommissionId& id, const std::string& note);

  Json save() const;
  Status restore(const Json& j);

private:
  CommissionId next_id();

  const DeviceRegistry* registry_;
  const ScenarioCatalog* catalog_;
  std::map<CommissionId, CommissionRecord> records_;
  long seq_ = 0;
};

} // namespace confab
