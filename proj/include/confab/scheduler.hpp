#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "confab/commission.hpp"
#include "confab/registry.hpp"
#include "confab/result.hpp"

namespace confab {

enum class PolicyKind { Static, Market, Fifo };

const char* policy_kind_name(PolicyKind k);
Result<PolicyKind> policy_kind_from_name(const std::string& name);

// Exact rational for gravity weights so renewal arithmetic stays integral.
struct Rational {
  long num = 1;
  long den = 1;

  static Result<Rational> parse(const std::string& decimal);
  long scale(long amount) const { return amount * num / den; }
  std::string to_string() const;
};

struct Participant {
  std::string participant_id;
  Currency balance = 0;
  Rational gravity{1, 1};
};

struct Policy {
  PolicyKind kind = PolicyKind::Static;
  Tick renewal_period = 20;   // market only
  Currency renewal_amount = 10; // market only, scaled by gravity
};

// One queue entry: the commission competes once per resolved target device.
struct QueueEntry {
  CommissionId commission_id;
  std::string source;
  long importance = 0;
  Tick submitted_at = 0;
  TimeWindow window;
  Tick scheduled_at = 0;
};

struct GateDecision {
  bool allowed = false;
  std::string reason; // stale-state | constraint <id> | model-error
  std::string detail;

  static GateDecision allow() { return {true, "", ""}; }
  static GateDecision deny(std::string reason, std::string detail = "") {
    return {false, std::move(reason), std::move(detail)};
  }
};

// Post-state of one device if the commission were applied: set-value
// post-conditions overwrite variation points, provide-service post-conditions
// raise service levels to at least min_level.
Result<DeviceState> apply_post_conditions(const DeviceState& state, const Commission& c,
                                          const OrganisationalFeatureModel& ofm);

// Orders pending commissions under the active policy and gates dispatches
// through business-scenario safety. Driven solely by the orchestration loop.
class Scheduler {
public:
  Scheduler(Policy policy, const DeviceRegistry& registry, const ScenarioCatalog& catalog)
      : policy_(policy), registry_(&registry), catalog_(&catalog) {}

  void add_participant(Participant p);
  const Participant* participant(const std::string& id) const;

  void enqueue(const DeviceId& device, QueueEntry entry);
  void remove_commission(const CommissionId& id);
  void remove_entry(const DeviceId& device, const CommissionId& id);
  bool queue_empty() const;
  std::vector<QueueEntry> queued_for(const DeviceId& device) const;
  std::vector<DeviceId> queued_devices() const;

  // Highest-value eligible commission for the device, or nothing. Eligibility:
  // window open at `now`, scheduled strictly before `now`, and (market) the
  // source can cover its bid.
  std::optional<CommissionId> select_next(const DeviceId& device, Tick now) const;

  // Removes the queue entry and, under the market policy, deducts the bid.
  Status dispatch(const DeviceId& device, const CommissionId& id);

  // Periodic importance-currency renewal. Off-period calls are a no-op and
  // report an empty delta with `on_period` false.
  struct RenewalDelta {
    bool on_period = false;
    std::map<std::string, Currency> credited;
  };
  RenewalDelta renew_currency(Tick now);

  // Project the commission onto the device and evaluate every constraint of
  // every scenario containing it, with other members' in-flight projections
  // overlaid. Allow iff all constraints hold on fresh state.
  GateDecision safety_gate(const Commission& c, const DeviceId& device, Tick now) const;

  // In-flight overlays: dispatched-but-not-yet-reported post-states, used by
  // the gate so concurrent commissions in one scenario see each other.
  void note_inflight(const DeviceId& device, DeviceState projected);
  void clear_inflight(const DeviceId& device);
  bool device_busy(const DeviceId& device) const { return inflight_.count(device) > 0; }

  // Conservation accounting (market): balances + spent = initial + renewals.
  Currency total_balance() const;
  Currency total_spent() const { return total_spent_; }
  Currency total_renewed() const { return total_renewed_; }
  Currency initial_total() const { return initial_total_; }

  const Policy& policy() const { return policy_; }

  Json save() const;
  Status restore(const Json& j);

private:
  bool entry_eligible(const QueueEntry& e, Tick now) const;

  Policy policy_;
  const DeviceRegistry* registry_;
  const ScenarioCatalog* catalog_;
  std::map<std::string, Participant> participants_;
  std::map<DeviceId, std::vector<QueueEntry>> queues_;
  std::map<DeviceId, DeviceState> inflight_;
  Currency total_spent_ = 0;
  Currency total_renewed_ = 0;
  Currency initial_total_ = 0;
};

} // namespace confab
