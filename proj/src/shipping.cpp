#include "confab/shipping.hpp"

#include <algorithm>
#include <functional>
#include <iomanip>
#include <sstream>

namespace confab {

const char* strategy_kind_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::Pull: return "pull";
    case StrategyKind::Push: return "push";
    case StrategyKind::Seed: return "seed";
  }
  return "unknown";
}

Result<StrategyKind> strategy_kind_from_name(const std::string& name) {
  if (name == "pull") return StrategyKind::Pull;
  if (name == "push") return StrategyKind::Push;
  if (name == "seed") return StrategyKind::Seed;
  return make_error("usage", "unknown strategy: " + name);
}

Json Strategy::to_json() const {
  return Json{{"kind", strategy_kind_name(kind)},
              {"poll_period", poll_period},
              {"origin_fanout", origin_fanout},
              {"seeder_fanout", seeder_fanout},
              {"min_seed_charge_pct", min_seed_charge_pct},
              {"min_seed_cores", min_seed_cores}};
}

Tick default_poll_phase(const DeviceId& id, Tick poll_period) {
  if (poll_period <= 1) return 0;
  // FNV-1a, stable across platforms (std::hash is not).
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return static_cast<Tick>(h % static_cast<uint64_t>(poll_period));
}

const char* delivery_status_name(DeliveryStatus s) {
  switch (s) {
    case DeliveryStatus::Pending: return "pending";
    case DeliveryStatus::Deferred: return "deferred";
    case DeliveryStatus::InTransit: return "in-transit";
    case DeliveryStatus::Delivered: return "delivered";
    case DeliveryStatus::Executed: return "executed";
    case DeliveryStatus::Failed: return "failed";
    case DeliveryStatus::Expired: return "expired";
  }
  return "unknown";
}

Json DeliveryReceipt::to_json() const {
  Json j{{"device_id", device_id},
         {"package_id", package_id},
         {"delivered_at", delivered_at},
         {"result", success ? "success" : "failure"}};
  if (executed_at) j["executed_at"] = *executed_at;
  if (!detail.empty()) j["detail"] = detail;
  return j;
}

bool TransmissionPlan::done() const {
  for (const auto& [id, d] : devices) {
    (void)id;
    if (d.status != DeliveryStatus::Executed && d.status != DeliveryStatus::Failed &&
        d.status != DeliveryStatus::Expired) {
      return false;
    }
  }
  return true;
}

Result<Strategy> Strategy::from_json(const Json& j) {
  Strategy s;
  auto kind = strategy_kind_from_name(j.value("kind", "push"));
  if (!kind.ok()) return kind.error();
  s.kind = kind.value();
  s.poll_period = j.value("poll_period", s.poll_period);
  s.origin_fanout = j.value("origin_fanout", s.origin_fanout);
  s.seeder_fanout = j.value("seeder_fanout", s.seeder_fanout);
  s.min_seed_charge_pct = j.value("min_seed_charge_pct", s.min_seed_charge_pct);
  s.min_seed_cores = j.value("min_seed_cores", s.min_seed_cores);
  if (s.origin_fanout < 1 || s.seeder_fanout < 1) {
    return make_error("validation", "fanouts must be >= 1");
  }
  return s;
}

namespace {

Result<DeliveryStatus> delivery_status_from_name(const std::string& name) {
  for (DeliveryStatus s : {DeliveryStatus::Pending, DeliveryStatus::Deferred,
                           DeliveryStatus::InTransit, DeliveryStatus::Delivered,
                           DeliveryStatus::Executed, DeliveryStatus::Failed,
                           DeliveryStatus::Expired}) {
    if (name == delivery_status_name(s)) return s;
  }
  return make_error("parse", "unknown delivery status: " + name);
}

} // namespace

Json TransmissionPlan::to_json() const {
  Json devices_json = Json::object();
  for (const auto& [id, d] : devices) {
    Json e{{"package_id", d.package_id},
           {"status", delivery_status_name(d.status)},
           {"latest_shipping_time", d.latest_shipping_time},
           {"required_charge_pct", d.required_charge_pct},
           {"interrupt_allowed", d.interrupt_allowed},
           {"package_bytes", d.package_bytes},
           {"exec_attempts", d.exec_attempts}};
    if (d.delivered_at >= 0) e["delivered_at"] = d.delivered_at;
    if (!d.detail.empty()) e["detail"] = d.detail;
    devices_json[id] = std::move(e);
  }
  Json receipts_json = Json::object();
  for (const auto& [id, r] : receipts) receipts_json[id] = r.to_json();
  return Json{{"rollout_id", rollout_id},
              {"commission_id", commission_id},
              {"strategy", strategy.to_json()},
              {"created_at", created_at},
              {"devices", devices_json},
              {"receipts", receipts_json}};
}

Result<RolloutId> RolloutEngine::plan_rollout(const std::vector<ConfigurationPackage>& packages,
                                              const Strategy& strategy, Tick now,
                                              const CommissionId& commission_id,
                                              const FleetView& fleet) {
  TransmissionPlan plan;
  std::ostringstream id;
  id << "r-" << std::setw(4) << std::setfill('0') << ++seq_;
  plan.rollout_id = id.str();
  plan.commission_id = commission_id;
  plan.strategy = strategy;
  plan.created_at = now;

  for (const auto& pkg : packages) {
    if (plan.devices.count(pkg.device_id) > 0) {
      return make_error("plan", "two packages for device " + pkg.device_id +
                                    " in one rollout");
    }
    PlanDevice d;
    d.package_id = pkg.package_id;
    d.required_charge_pct = pkg.metadata.required_charge_pct;
    d.interrupt_allowed = pkg.metadata.interrupt_allowed;
    d.latest_shipping_time = pkg.metadata.latest_shipping_time;
    d.package_bytes = pkg.file_bytes().size();
    if (now > d.latest_shipping_time) {
      d.status = DeliveryStatus::Expired;
      d.detail = "latest shipping time already past at plan time";
    } else if (fleet.charge_pct(pkg.device_id) < d.required_charge_pct) {
      d.status = DeliveryStatus::Deferred;
      d.detail = "charge below required";
    }
    plan.devices.emplace(pkg.device_id, std::move(d));
  }
  RolloutId rid = plan.rollout_id;
  plans_.emplace(rid, std::move(plan));
  return rid;
}

std::set<DeviceId> RolloutEngine::select_seeders(const TransmissionPlan& plan, Tick now,
                                                 const FleetView& fleet) const {
  std::set<DeviceId> out;
  for (const auto& [id, d] : plan.devices) {
    bool holds_package = (d.status == DeliveryStatus::Delivered ||
                          d.status == DeliveryStatus::Executed) &&
                         d.delivered_at >= 0 && d.delivered_at < now;
    if (!holds_package) continue;
    if (!fleet.online(id)) continue;
    if (fleet.cores(id) < plan.strategy.min_seed_cores) continue;
    bool power_ok = fleet.power_supply(id) == "mains" ||
                    fleet.charge_pct(id) >= plan.strategy.min_seed_charge_pct;
    if (!power_ok) continue;
    out.insert(id);
  }
  return out;
}

RolloutEngine::AdvanceResult RolloutEngine::advance_all(Tick now, const FleetView& fleet) {
  AdvanceResult result;
  for (auto& [id, plan] : plans_) {
    (void)id;
    if (plan.done()) continue;
    AdvanceResult r = advance_plan(plan, now, fleet);
    result.transfers.insert(result.transfers.end(), r.transfers.begin(), r.transfers.end());
    result.changes.insert(result.changes.end(), r.changes.begin(), r.changes.end());
  }
  transfer_log_.insert(transfer_log_.end(), result.transfers.begin(), result.transfers.end());
  return result;
}

RolloutEngine::AdvanceResult RolloutEngine::advance_plan(TransmissionPlan& plan, Tick now,
                                                         const FleetView& fleet) {
  AdvanceResult result;
  auto change = [&](const DeviceId& device, DeliveryStatus status, const std::string& detail) {
    plan.devices[device].status = status;
    plan.devices[device].detail = detail;
    result.changes.push_back({plan.rollout_id, plan.commission_id, device, status, detail});
  };

  // Shipping-window sweep and charge re-evaluation.
  for (auto& [device, d] : plan.devices) {
    if (d.status == DeliveryStatus::Pending || d.status == DeliveryStatus::Deferred) {
      if (now > d.latest_shipping_time) {
        change(device, DeliveryStatus::Expired, "latest shipping time elapsed");
        continue;
      }
      bool charged = fleet.charge_pct(device) >= d.required_charge_pct;
      if (d.status == DeliveryStatus::Pending && !charged) {
        change(device, DeliveryStatus::Deferred, "charge below required");
      } else if (d.status == DeliveryStatus::Deferred && charged) {
        change(device, DeliveryStatus::Pending, "charge recovered");
      }
    }
  }

  // The origin announces at creation; transfers begin the following tick.
  if (now <= plan.created_at) return result;

  std::vector<DeviceId> ready;
  for (const auto& [device, d] : plan.devices) {
    if (d.status != DeliveryStatus::Pending) continue;
    if (!fleet.accepts_transfer(device)) continue; // retried next tick
    ready.push_back(device);
  }
  std::sort(ready.begin(), ready.end());

  auto deliver = [&](const std::string& sender, const DeviceId& receiver) {
    PlanDevice& d = plan.devices[receiver];
    d.delivered_at = now;
    DeliveryReceipt receipt;
    receipt.device_id = receiver;
    receipt.package_id = d.package_id;
    receipt.delivered_at = now;
    plan.receipts[receiver] = receipt;
    result.transfers.push_back(
        {now, plan.rollout_id, sender, receiver, d.package_id, d.package_bytes});
    change(receiver, DeliveryStatus::Delivered, "from " + sender);
  };

  switch (plan.strategy.kind) {
    case StrategyKind::Pull: {
      for (const auto& device : ready) {
        Tick phase = fleet.poll_phase(device, plan.strategy.poll_period);
        if (plan.strategy.poll_period > 0 && now % plan.strategy.poll_period == phase) {
          deliver("origin", device);
        }
      }
      break;
    }
    case StrategyKind::Push: {
      long budget = plan.strategy.origin_fanout;
      for (const auto& device : ready) {
        if (budget <= 0) break;
        deliver("origin", device);
        --budget;
      }
      break;
    }
    case StrategyKind::Seed: {
      std::set<DeviceId> seeders = select_seeders(plan, now, fleet);
      // Sender capacity list: origin first, then seeders in id order.
      std::vector<std::pair<std::string, long>> senders;
      senders.emplace_back("origin", plan.strategy.origin_fanout);
      for (const auto& s : seeders) senders.emplace_back(s, plan.strategy.seeder_fanout);
      size_t sender_idx = 0;
      for (const auto& device : ready) {
        while (sender_idx < senders.size() && senders[sender_idx].second <= 0) ++sender_idx;
        if (sender_idx >= senders.size()) break;
        deliver(senders[sender_idx].first, device);
        --senders[sender_idx].second;
      }
      break;
    }
  }
  return result;
}

std::vector<RolloutEngine::PendingExecution> RolloutEngine::pending_executions(Tick now) const {
  std::vector<PendingExecution> out;
  for (const auto& [rid, plan] : plans_) {
    for (const auto& [device, d] : plan.devices) {
      if (d.status == DeliveryStatus::Delivered && d.delivered_at < now) {
        out.push_back({rid, plan.commission_id, device, d.package_id, d.interrupt_allowed});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const PendingExecution& a, const PendingExecution& b) {
    return std::tie(a.device_id, a.package_id) < std::tie(b.device_id, b.package_id);
  });
  return out;
}

Result<RolloutEngine::ExecutionOutcome> RolloutEngine::record_execution(
    const RolloutId& rollout, const DeviceId& device, Tick now, bool success,
    const std::string& detail, int retry_budget) {
  auto pit = plans_.find(rollout);
  if (pit == plans_.end()) return make_error("not-found", "unknown rollout " + rollout);
  auto dit = pit->second.devices.find(device);
  if (dit == pit->second.devices.end()) {
    return make_error("not-found", "device not in rollout " + rollout + ": " + device);
  }
  PlanDevice& d = dit->second;
  if (d.status != DeliveryStatus::Delivered) {
    return make_error("lifecycle", "execution recorded in state " +
                                       std::string(delivery_status_name(d.status)));
  }
  DeliveryReceipt& receipt = pit->second.receipts[device];
  receipt.executed_at = now;
  receipt.success = success;
  receipt.detail = detail;

  ExecutionOutcome outcome;
  if (success) {
    d.status = DeliveryStatus::Executed;
    d.detail = detail;
  } else {
    d.exec_attempts += 1;
    if (d.exec_attempts >= retry_budget) {
      d.status = DeliveryStatus::Failed;
      d.detail = detail;
    } else {
      // Stays Delivered; the agent retries next tick.
      receipt.executed_at.reset();
      d.detail = detail + " (attempt " + std::to_string(d.exec_attempts) + ")";
    }
  }
  outcome.status = d.status;
  outcome.receipt = receipt;
  return outcome;
}

const TransmissionPlan* RolloutEngine::find(const RolloutId& id) const {
  auto it = plans_.find(id);
  return it == plans_.end() ? nullptr : &it->second;
}

std::vector<const TransmissionPlan*> RolloutEngine::all_plans() const {
  std::vector<const TransmissionPlan*> out;
  for (const auto& [id, plan] : plans_) {
    (void)id;
    out.push_back(&plan);
  }
  return out;
}

bool RolloutEngine::all_done() const {
  for (const auto& [id, plan] : plans_) {
    (void)id;
    if (!plan.done()) return false;
  }
  return true;
}

Json RolloutEngine::save() const {
  Json plans = Json::array();
  for (const auto& [id, plan] : plans_) {
    (void)id;
    plans.push_back(plan.to_json());
  }
  Json transfers = Json::array();
  for (const auto& t : transfer_log_) {
    transfers.push_back(Json{{"tick", t.tick},
                             {"rollout_id", t.rollout_id},
                             {"sender", t.sender},
                             {"receiver", t.receiver},
                             {"package_id", t.package_id},
                             {"bytes", t.bytes}});
  }
  return Json{{"seq", seq_}, {"plans", plans}, {"transfers", transfers}};
}

Status RolloutEngine::restore(const Json& j) {
  plans_.clear();
  transfer_log_.clear();
  seq_ = j.value("seq", 0L);
  for (const auto& pj : j.value("plans", Json::array())) {
    TransmissionPlan plan;
    plan.rollout_id = pj.value("rollout_id", "");
    plan.commission_id = pj.value("commission_id", "");
    auto strategy = Strategy::from_json(pj.value("strategy", Json::object()));
    if (!strategy.ok()) return strategy.error();
    plan.strategy = strategy.value();
    plan.created_at = pj.value("created_at", Tick{0});
    const Json devices_obj = pj.value("devices", Json::object());
    for (const auto& [device, dj] : devices_obj.items()) {
      PlanDevice d;
      d.package_id = dj.value("package_id", "");
      auto status = delivery_status_from_name(dj.value("status", "pending"));
      if (!status.ok()) return status.error();
      d.status = status.value();
      d.delivered_at = dj.value("delivered_at", Tick{-1});
      d.required_charge_pct = dj.value("required_charge_pct", 0.0);
      d.interrupt_allowed = dj.value("interrupt_allowed", true);
      d.latest_shipping_time = dj.value("latest_shipping_time", Tick{0});
      d.package_bytes = dj.value("package_bytes", size_t{0});
      d.exec_attempts = dj.value("exec_attempts", 0);
      d.detail = dj.value("detail", "");
      plan.devices.emplace(device, std::move(d));
    }
    const Json receipts_obj = pj.value("receipts", Json::object());
    for (const auto& [device, rj] : receipts_obj.items()) {
      DeliveryReceipt r;
      r.device_id = device;
      r.package_id = rj.value("package_id", "");
      r.delivered_at = rj.value("delivered_at", Tick{-1});
      if (rj.contains("executed_at")) r.executed_at = rj["executed_at"].get<Tick>();
      r.success = rj.value("result", "failure") == "success";
      r.detail = rj.value("detail", "");
      plan.receipts.emplace(device, std::move(r));
    }
    plans_.emplace(plan.rollout_id, std::move(plan));
  }
  for (const auto& tj : j.value("transfers", Json::array())) {
    TransferRecord t;
    t.tick = tj.value("tick", Tick{0});
    t.rollout_id = tj.value("rollout_id", "");
    t.sender = tj.value("sender", "");
    t.receiver = tj.value("receiver", "");
    t.package_id = tj.value("package_id", "");
    t.bytes = tj.value("bytes", size_t{0});
    transfer_log_.push_back(std::move(t));
  }
  return Status::ok_status();
}

} // namespace confab
