#include "confab/scheduler.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <tuple>

namespace confab {

const char* policy_kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Static: return "static";
    case PolicyKind::Market: return "market";
    case PolicyKind::Fifo: return "fifo";
  }
  return "unknown";
}

Result<PolicyKind> policy_kind_from_name(const std::string& name) {
  if (name == "static") return PolicyKind::Static;
  if (name == "market") return PolicyKind::Market;
  if (name == "fifo") return PolicyKind::Fifo;
  return make_error("usage", "unknown policy: " + name);
}

Result<Rational> Rational::parse(const std::string& decimal) {
  if (decimal.empty()) return make_error("parse", "empty gravity weight");
  std::string intpart = decimal, fracpart;
  auto dot = decimal.find('.');
  if (dot != std::string::npos) {
    intpart = decimal.substr(0, dot);
    fracpart = decimal.substr(dot + 1);
  }
  auto all_digits = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(),
                                     [](char c) { return c >= '0' && c <= '9'; });
  };
  if (!all_digits(intpart) || (!fracpart.empty() && !all_digits(fracpart))) {
    return make_error("parse", "bad gravity weight: " + decimal);
  }
  Rational r;
  r.num = std::stol(intpart);
  r.den = 1;
  for (char c : fracpart) {
    r.num = r.num * 10 + (c - '0');
    r.den *= 10;
  }
  if (r.num <= 0) return make_error("parse", "gravity weight must be positive");
  long g = std::gcd(r.num, r.den);
  r.num /= g;
  r.den /= g;
  return r;
}

std::string Rational::to_string() const {
  std::ostringstream out;
  out << num;
  if (den != 1) out << '/' << den;
  return out.str();
}

Result<DeviceState> apply_post_conditions(const DeviceState& state, const Commission& c,
                                          const OrganisationalFeatureModel& ofm) {
  std::map<std::string, Json> changes;
  for (const auto& pc : c.required) {
    if (pc.kind == PostCondition::Kind::SetValue) changes[pc.path] = pc.value;
  }
  auto projected = project_state(state, changes, ofm);
  if (!projected.ok()) return projected;
  DeviceState out = std::move(projected).take();
  for (const auto& pc : c.required) {
    if (pc.kind != PostCondition::Kind::ProvideService) continue;
    int& level = out.provided_services[pc.service];
    level = std::max(level, pc.min_level);
  }
  return out;
}

void Scheduler::add_participant(Participant p) {
  initial_total_ += p.balance;
  participants_[p.participant_id] = std::move(p);
}

const Participant* Scheduler::participant(const std::string& id) const {
  auto it = participants_.find(id);
  return it == participants_.end() ? nullptr : &it->second;
}

void Scheduler::enqueue(const DeviceId& device, QueueEntry entry) {
  auto& q = queues_[device];
  for (const auto& e : q) {
    if (e.commission_id == entry.commission_id) return; // once per device
  }
  q.push_back(std::move(entry));
}

void Scheduler::remove_commission(const CommissionId& id) {
  for (auto& [device, q] : queues_) {
    (void)device;
    q.erase(std::remove_if(q.begin(), q.end(),
                           [&](const QueueEntry& e) { return e.commission_id == id; }),
            q.end());
  }
}

void Scheduler::remove_entry(const DeviceId& device, const CommissionId& id) {
  auto it = queues_.find(device);
  if (it == queues_.end()) return;
  auto& q = it->second;
  q.erase(std::remove_if(q.begin(), q.end(),
                         [&](const QueueEntry& e) { return e.commission_id == id; }),
          q.end());
}

bool Scheduler::queue_empty() const {
  for (const auto& [device, q] : queues_) {
    (void)device;
    if (!q.empty()) return false;
  }
  return true;
}

std::vector<QueueEntry> Scheduler::queued_for(const DeviceId& device) const {
  auto it = queues_.find(device);
  return it == queues_.end() ? std::vector<QueueEntry>{} : it->second;
}

std::vector<DeviceId> Scheduler::queued_devices() const {
  std::vector<DeviceId> out;
  for (const auto& [device, q] : queues_) {
    if (!q.empty()) out.push_back(device);
  }
  return out;
}

bool Scheduler::entry_eligible(const QueueEntry& e, Tick now) const {
  if (now < e.window.earliest || now > e.window.latest) return false;
  if (e.scheduled_at >= now) return false; // selected strictly after scheduling
  if (policy_.kind == PolicyKind::Market) {
    const Participant* p = participant(e.source);
    if (p == nullptr) return false;
    if (p->balance < e.importance) return false; // bids never exceed balance
  }
  return true;
}

std::optional<CommissionId> Scheduler::select_next(const DeviceId& device, Tick now) const {
  auto it = queues_.find(device);
  if (it == queues_.end() || it->second.empty()) return std::nullopt;
  const QueueEntry* best = nullptr;
  for (const auto& e : it->second) {
    if (!entry_eligible(e, now)) continue;
    if (best == nullptr) {
      best = &e;
      continue;
    }
    bool better;
    if (policy_.kind == PolicyKind::Fifo) {
      better = std::tie(e.submitted_at, e.commission_id) <
               std::tie(best->submitted_at, best->commission_id);
    } else {
      // Highest attached value wins; ties by earliest submission, then id.
      if (e.importance != best->importance) {
        better = e.importance > best->importance;
      } else {
        better = std::tie(e.submitted_at, e.commission_id) <
                 std::tie(best->submitted_at, best->commission_id);
      }
    }
    if (better) best = &e;
  }
  if (best == nullptr) return std::nullopt;
  return best->commission_id;
}

Status Scheduler::dispatch(const DeviceId& device, const CommissionId& id) {
  auto it = queues_.find(device);
  if (it == queues_.end()) return make_error("not-found", "no queue for device " + device);
  auto& q = it->second;
  auto eit = std::find_if(q.begin(), q.end(),
                          [&](const QueueEntry& e) { return e.commission_id == id; });
  if (eit == q.end()) return make_error("not-found", "commission not queued: " + id);
  if (policy_.kind == PolicyKind::Market) {
    auto pit = participants_.find(eit->source);
    if (pit == participants_.end()) {
      return make_error("validation", "unknown participant: " + eit->source);
    }
    if (pit->second.balance < eit->importance) {
      return make_error("validation", "bid exceeds balance for " + eit->source);
    }
    pit->second.balance -= eit->importance;
    total_spent_ += eit->importance;
  }
  q.erase(eit);
  return Status::ok_status();
}

Scheduler::RenewalDelta Scheduler::renew_currency(Tick now) {
  RenewalDelta delta;
  if (policy_.kind != PolicyKind::Market) return delta;
  if (policy_.renewal_period <= 0 || now % policy_.renewal_period != 0) {
    return delta; // off-period: no-op, caller logs the warning
  }
  delta.on_period = true;
  for (auto& [id, p] : participants_) {
    Currency credit = p.gravity.scale(policy_.renewal_amount);
    p.balance += credit;
    total_renewed_ += credit;
    delta.credited[id] = credit;
  }
  return delta;
}

GateDecision Scheduler::safety_gate(const Commission& c, const DeviceId& device,
                                    Tick now) const {
  auto fresh = registry_->get_state(device, now);
  if (!fresh.ok()) {
    return GateDecision::deny("model-error", fresh.error().message);
  }
  if (!fresh.value().fresh) {
    return GateDecision::deny("stale-state", "device " + device + " last reported at tick " +
                                                 std::to_string(fresh.value().state.last_updated));
  }
  auto projected = apply_post_conditions(fresh.value().state, c, registry_->ofm());
  if (!projected.ok()) {
    return GateDecision::deny("model-error", projected.error().message);
  }

  auto scenarios = catalog_->scenarios_for(device);
  for (const BusinessScenario* scenario : scenarios) {
    std::map<DeviceId, DeviceState> states;
    for (const auto& member : scenario->member_devices) {
      if (member == device) {
        states.emplace(member, projected.value());
        continue;
      }
      auto member_state = registry_->get_state(member, now);
      if (!member_state.ok()) {
        return GateDecision::deny("model-error", member_state.error().message);
      }
      auto inflight = inflight_.find(member);
      if (inflight != inflight_.end()) {
        states.emplace(member, inflight->second);
      } else {
        states.emplace(member, member_state.value().state);
      }
    }
    for (size_t i = 0; i < scenario->constraints.size(); ++i) {
      auto verdict = evaluate_constraint(scenario->constraints[i], states);
      if (!verdict.ok()) {
        return GateDecision::deny("model-error", verdict.error().message);
      }
      if (!verdict.value()) {
        std::ostringstream which;
        which << "constraint " << scenario->scenario_id << "/c" << i;
        return GateDecision::deny(which.str(), scenario->constraints[i].text);
      }
    }
  }
  return GateDecision::allow();
}

void Scheduler::note_inflight(const DeviceId& device, DeviceState projected) {
  inflight_[device] = std::move(projected);
}

void Scheduler::clear_inflight(const DeviceId& device) {
  inflight_.erase(device);
}

Currency Scheduler::total_balance() const {
  Currency sum = 0;
  for (const auto& [id, p] : participants_) {
    (void)id;
    sum += p.balance;
  }
  return sum;
}

Json Scheduler::save() const {
  Json participants = Json::object();
  for (const auto& [id, p] : participants_) {
    participants[id] = Json{{"balance", p.balance},
                            {"gravity_num", p.gravity.num},
                            {"gravity_den", p.gravity.den}};
  }
  Json queues = Json::object();
  for (const auto& [device, q] : queues_) {
    Json entries = Json::array();
    for (const auto& e : q) {
      entries.push_back(Json{{"commission_id", e.commission_id},
                             {"source", e.source},
                             {"importance", e.importance},
                             {"submitted_at", e.submitted_at},
                             {"earliest", e.window.earliest},
                             {"latest", e.window.latest},
                             {"scheduled_at", e.scheduled_at}});
    }
    queues[device] = std::move(entries);
  }
  Json inflight = Json::object();
  for (const auto& [device, state] : inflight_) {
    inflight[device] = state.to_json();
  }
  return Json{{"participants", participants},
              {"queues", queues},
              {"inflight", inflight},
              {"total_spent", total_spent_},
              {"total_renewed", total_renewed_},
              {"initial_total", initial_total_}};
}

Status Scheduler::restore(const Json& j) {
  const Json participants_obj = j.value("participants", Json::object());
  for (const auto& [id, pj] : participants_obj.items()) {
    auto it = participants_.find(id);
    if (it == participants_.end()) {
      Participant p;
      p.participant_id = id;
      participants_.emplace(id, std::move(p));
      it = participants_.find(id);
    }
    it->second.balance = pj.value("balance", Currency{0});
    it->second.gravity.num = pj.value("gravity_num", 1L);
    it->second.gravity.den = pj.value("gravity_den", 1L);
  }
  queues_.clear();
  const Json queues_obj = j.value("queues", Json::object());
  for (const auto& [device, entries] : queues_obj.items()) {
    for (const auto& ej : entries) {
      QueueEntry e;
      e.commission_id = ej.value("commission_id", "");
      e.source = ej.value("source", "");
      e.importance = ej.value("importance", 0L);
      e.submitted_at = ej.value("submitted_at", Tick{0});
      e.window.earliest = ej.value("earliest", Tick{0});
      e.window.latest = ej.value("latest", Tick{0});
      e.scheduled_at = ej.value("scheduled_at", Tick{0});
      queues_[device].push_back(std::move(e));
    }
  }
  inflight_.clear();
  const Json inflight_obj = j.value("inflight", Json::object());
  for (const auto& [device, sj] : inflight_obj.items()) {
    auto state = DeviceState::from_json(sj);
    if (!state.ok()) return state.error();
    inflight_.emplace(device, state.value());
  }
  total_spent_ = j.value("total_spent", Currency{0});
  total_renewed_ = j.value("total_renewed", Currency{0});
  if (j.contains("initial_total")) initial_total_ = j["initial_total"].get<Currency>();
  return Status::ok_status();
}

} // namespace confab
