#include "confab/fleet_sim.hpp"

#include <algorithm>
#include <sstream>

namespace confab {

namespace {

double clamp_pct(double v) { return std::min(100.0, std::max(0.0, v)); }

ConfigurationStore make_store(const RunConfig& config) {
  if (config.store_dir.empty()) return ConfigurationStore(config.mac_secret);
  return ConfigurationStore(config.store_dir, config.mac_secret);
}

BuildSettings settings_from(const RunConfig& config) {
  BuildSettings s;
  s.required_charge_pct = config.required_charge_default;
  s.interrupt_allowed = config.interrupt_allowed_default;
  s.importance_max = config.importance_max;
  s.shipping_budget = config.shipping_budget;
  s.mac_secret = config.mac_secret;
  return s;
}

} // namespace

bool SimDevice::is_mains() const {
  const Json* supply = description.field("capabilities/power/supply");
  return supply != nullptr && supply->is_string() && *supply == "mains";
}

long SimDevice::cores() const {
  const Json* c = description.field("capabilities/computational/cores");
  return c != nullptr && c->is_number() ? c->get<long>() : 1;
}

bool SimDevice::busy_at(Tick now) const {
  if (duty.period <= 0 || duty.busy_len <= 0) return false;
  return (now % duty.period) < duty.busy_len;
}

Policy World::policy_from_config() const {
  Policy p;
  auto kind = policy_kind_from_name(config_.policy);
  p.kind = kind.ok() ? kind.value() : PolicyKind::Static;
  p.renewal_period = config_.renewal_period;
  p.renewal_amount = config_.renewal_amount;
  return p;
}

Strategy World::strategy_from_config() const {
  Strategy s;
  auto kind = strategy_kind_from_name(config_.strategy);
  s.kind = kind.ok() ? kind.value() : StrategyKind::Push;
  s.poll_period = config_.poll_period;
  s.origin_fanout = config_.origin_fanout;
  s.seeder_fanout = config_.seeder_fanout;
  s.min_seed_charge_pct = config_.min_seed_charge_pct;
  s.min_seed_cores = config_.min_seed_cores;
  return s;
}

World::World(RunConfig config)
    : config_(std::move(config)),
      registry_(ofm_, config_.staleness_threshold),
      ledger_(registry_, catalog_),
      scheduler_(Policy{}, registry_, catalog_),
      store_(make_store(config_)),
      factory_(registry_, ledger_, catalog_, artifacts_, settings_from(config_)) {
  scheduler_ = Scheduler(policy_from_config(), registry_, catalog_);
}

Status World::init(FleetBootstrap bootstrap) {
  if (initialized_) return make_error("lifecycle", "world already initialized");
  if (!policy_kind_from_name(config_.policy).ok()) {
    return make_error("usage", "unknown policy: " + config_.policy);
  }
  if (!strategy_kind_from_name(config_.strategy).ok()) {
    return make_error("usage", "unknown strategy: " + config_.strategy);
  }

  auto ofm_ok = bootstrap.ofm.validate(DeviceFeatureMetamodel::standard());
  if (!ofm_ok.ok()) return ofm_ok;
  ofm_ = std::move(bootstrap.ofm);

  for (auto& dev : bootstrap.devices) {
    auto registered = registry_.register_device(dev.description, dev.live, 0);
    if (!registered.ok()) return registered.error();
    DeviceId id = dev.description.device_id;
    if (dev.staleness_threshold) {
      registry_.set_staleness_threshold(id, *dev.staleness_threshold);
    }
    devices_.emplace(id, std::move(dev));
  }
  for (auto& scenario : bootstrap.scenarios) {
    auto added = catalog_.add_scenario(std::move(scenario), registry_);
    if (!added.ok()) return added;
  }

  if (scheduler_.policy().kind == PolicyKind::Market) {
    for (const auto& [name, pc] : config_.participants) {
      auto gravity = Rational::parse(pc.gravity);
      if (!gravity.ok()) return gravity.error();
      scheduler_.add_participant({name, pc.initial_balance, gravity.value()});
    }
  }

  events_.append(0, 0, "run-start",
                 Json{{"seed", config_.seed},
                      {"policy", config_.policy},
                      {"strategy", config_.strategy},
                      {"devices", devices_.size()},
                      {"scenarios", catalog_.all().size()}});
  initialized_ = true;
  return Status::ok_status();
}

Status World::add_component(TransformationComponent component) {
  return artifacts_.put_component(std::move(component));
}

Result<CommissionId> World::submit_commission(Commission c) {
  auto result = ledger_.submit(std::move(c), now_);
  if (result.ok()) {
    const CommissionRecord* rec = ledger_.find(result.value());
    events_.append(now_, current_phase_, "submitted",
                   Json{{"commission", result.value()},
                        {"source", rec->commission.source},
                        {"importance", rec->commission.importance},
                        {"devices", rec->devices.size()}});
  } else {
    events_.append(now_, current_phase_, "submit-rejected",
                   Json{{"category", result.error().category},
                        {"message", result.error().message}});
  }
  return result;
}

void World::schedule_commission(Tick at, Commission c) {
  scheduled_commissions_.emplace(at, std::move(c));
}

const SimDevice* World::device(const DeviceId& id) const {
  auto it = devices_.find(id);
  return it == devices_.end() ? nullptr : &it->second;
}

SimDevice* World::device_mutable(const DeviceId& id) {
  auto it = devices_.find(id);
  return it == devices_.end() ? nullptr : &it->second;
}

std::vector<DeviceId> World::device_ids() const {
  std::vector<DeviceId> out;
  for (const auto& [id, dev] : devices_) {
    (void)dev;
    out.push_back(id);
  }
  return out;
}

bool World::online(const DeviceId& id) const {
  const SimDevice* dev = device(id);
  return dev != nullptr && dev->live.online;
}

bool World::accepts_transfer(const DeviceId& id) const {
  const SimDevice* dev = device(id);
  if (dev == nullptr || !dev->live.online) return false;
  if (dev->dropping_until > now_) return false;
  const std::string& token = dev->auth_token.empty() ? config_.auth_token : dev->auth_token;
  return token == config_.auth_token;
}

double World::charge_pct(const DeviceId& id) const {
  const SimDevice* dev = device(id);
  return dev == nullptr ? 0.0 : dev->live.charge_pct;
}

std::string World::power_supply(const DeviceId& id) const {
  const SimDevice* dev = device(id);
  if (dev == nullptr) return "battery";
  const Json* supply = dev->description.field("capabilities/power/supply");
  return supply != nullptr && supply->is_string() ? supply->get<std::string>() : "battery";
}

long World::cores(const DeviceId& id) const {
  const SimDevice* dev = device(id);
  return dev == nullptr ? 1 : dev->cores();
}

Tick World::poll_phase(const DeviceId& id, Tick poll_period) const {
  const SimDevice* dev = device(id);
  if (dev != nullptr && dev->poll_phase) {
    return poll_period > 0 ? *dev->poll_phase % poll_period : 0;
  }
  return default_poll_phase(id, poll_period);
}

void World::drain(SimDevice& dev, double pct) {
  if (dev.is_mains() || pct <= 0.0) return;
  dev.live.charge_pct = clamp_pct(dev.live.charge_pct - pct);
}

// phase 1 — scheduled faults, recharges, idle drain
void World::phase_faults() {
  current_phase_ = 1;
  for (auto& [id, dev] : devices_) {
    for (const auto& f : dev.faults) {
      if (f.at != now_) continue;
      Tick until = now_ + std::max<Tick>(1, f.duration);
      if (f.kind == "offline") {
        dev.offline_until = std::max(dev.offline_until, until);
      } else if (f.kind == "drop-message") {
        dev.dropping_until = std::max(dev.dropping_until, until);
      } else if (f.kind == "exec-fail") {
        dev.exec_fail_until = std::max(dev.exec_fail_until, until);
      }
      events_.append(now_, 1, "fault",
                     Json{{"device", id}, {"kind", f.kind}, {"until", until}});
    }
    bool was_online = dev.live.online;
    dev.live.online = dev.offline_until <= now_;
    if (was_online != dev.live.online) {
      events_.append(now_, 1, dev.live.online ? "device-online" : "device-offline",
                     Json{{"device", id}});
    }
    drain(dev, dev.idle_drain_pct_per_tick);
    for (const auto& r : dev.recharges) {
      if (r.at != now_) continue;
      dev.live.charge_pct = clamp_pct(dev.live.charge_pct + r.amount);
      events_.append(now_, 1, "recharge",
                     Json{{"device", id}, {"amount", r.amount},
                          {"charge_pct", dev.live.charge_pct}});
    }
  }
}

// phase 2 — importance currency renewal
void World::phase_renewal() {
  current_phase_ = 2;
  if (scheduler_.policy().kind != PolicyKind::Market) return;
  auto delta = scheduler_.renew_currency(now_);
  if (!delta.on_period) return;
  for (const auto& [participant, credit] : delta.credited) {
    events_.append(now_, 2, "renewal", Json{{"participant", participant}, {"credit", credit}});
  }
}

void World::expire_sweep() {
  for (const CommissionRecord* rec : ledger_.all()) {
    if (commission_state_terminal(rec->state)) continue;
    if (rec->commission.window.latest >= now_) continue;
    const CommissionId id = rec->commission.commission_id;
    scheduler_.remove_commission(id);
    bool any_marked = false;
    for (const auto& [device, pipeline] : rec->devices) {
      if (pipeline.stage == DeviceStage::Pending) {
        ledger_.mark_device(id, device, DeviceStage::Expired, "window closed");
        any_marked = true;
      }
    }
    if (any_marked) {
      events_.append(now_, 3, "window-closed", Json{{"commission", id}});
    }
    resolve_commission_if_done(id, 3);
  }
}

// phase 3 — intake: expiry sweep, scheduled submissions, watch rules, queueing
void World::phase_intake() {
  current_phase_ = 3;
  expire_sweep();

  while (!scheduled_commissions_.empty() && scheduled_commissions_.begin()->first <= now_) {
    Commission c = scheduled_commissions_.begin()->second;
    scheduled_commissions_.erase(scheduled_commissions_.begin());
    submit_commission(std::move(c));
  }

  // Internal requirement sources: agents watching their own parameters.
  for (auto& [id, dev] : devices_) {
    if (!dev.live.online) continue;
    for (auto& watch : dev.watches) {
      if (watch.fired) continue;
      Json scratch;
      const Json* field = state_field(dev.live, watch.path, scratch);
      if (field == nullptr || !field->is_number()) continue;
      double v = field->get<double>();
      bool crossed = (watch.below && v < *watch.below) || (watch.above && v > *watch.above);
      if (!crossed) continue;
      watch.fired = true;
      auto parsed = Commission::from_json(watch.commission_template);
      if (!parsed.ok()) continue;
      Commission c = parsed.value();
      c.source = id;
      if (c.targets.empty()) c.targets = {id};
      events_.append(now_, 3, "internal-commission",
                     Json{{"device", id}, {"path", watch.path}, {"value", v}});
      submit_commission(std::move(c));
    }
  }

  // Queue up commissions submitted strictly before this tick.
  for (const CommissionRecord* rec : ledger_.all()) {
    if (rec->state != CommissionState::Submitted) continue;
    if (rec->commission.submitted_at >= now_) continue;
    const CommissionId id = rec->commission.commission_id;
    for (const auto& [device, pipeline] : rec->devices) {
      (void)pipeline;
      QueueEntry e;
      e.commission_id = id;
      e.source = rec->commission.source;
      e.importance = rec->commission.importance;
      e.submitted_at = rec->commission.submitted_at;
      e.window = rec->commission.window;
      e.scheduled_at = now_;
      scheduler_.enqueue(device, std::move(e));
    }
    ledger_.transition(id, CommissionState::Scheduled, now_);
    events_.append(now_, 3, "scheduled", Json{{"commission", id}});
  }
}

// phase 4 — per-device selection, safety gate, factory pipeline
void World::phase_schedule_and_build() {
  current_phase_ = 4;
  std::map<CommissionId, std::vector<ConfigurationPackage>> built;

  for (const auto& [device_id, dev] : devices_) {
    (void)dev;
    if (scheduler_.device_busy(device_id)) continue;
    auto pick = scheduler_.select_next(device_id, now_);
    if (!pick) continue;
    const CommissionId commission_id = *pick;
    const CommissionRecord* rec = ledger_.find(commission_id);
    if (rec == nullptr) {
      scheduler_.remove_entry(device_id, commission_id);
      continue;
    }
    const Commission commission = rec->commission;

    GateDecision gate = scheduler_.safety_gate(commission, device_id, now_);
    if (!gate.allowed) {
      events_.append(now_, 4, "denied",
                     Json{{"commission", commission_id}, {"device", device_id},
                          {"reason", gate.reason}, {"detail", gate.detail}});
      continue; // stays queued, retried on state change until the window closes
    }

    auto fail_device = [&](const std::string& kind, const Error& err) {
      events_.append(now_, 4, kind,
                     Json{{"commission", commission_id}, {"device", device_id},
                          {"category", err.category}, {"message", err.message}});
      ledger_.mark_device(commission_id, device_id, DeviceStage::Failed,
                          err.category + ": " + err.message);
      scheduler_.remove_entry(device_id, commission_id);
      resolve_commission_if_done(commission_id, 4);
    };

    auto inputs = factory_.gather_inputs(commission_id, device_id, now_);
    if (!inputs.ok()) {
      if (inputs.error().category == "gather-failed(stale)") {
        // Transient: wait for a fresh report.
        events_.append(now_, 4, "gather-failed",
                       Json{{"commission", commission_id}, {"device", device_id},
                            {"category", inputs.error().category},
                            {"message", inputs.error().message}});
      } else {
        fail_device("gather-failed", inputs.error());
      }
      continue;
    }

    auto precheck = Factory::check_preconditions(inputs.value(), ofm_);
    if (!precheck.ok()) {
      if (precheck.error().category == "mismatch(offline)") {
        events_.append(now_, 4, "precondition-mismatch",
                       Json{{"commission", commission_id}, {"device", device_id},
                            {"category", precheck.error().category}});
      } else {
        fail_device("precondition-mismatch", precheck.error());
      }
      continue;
    }
    if (precheck.value().no_op_candidate) {
      events_.append(now_, 4, "no-op-candidate",
                     Json{{"commission", commission_id}, {"device", device_id}});
    }

    auto product = Factory::build(inputs.value(), now_, factory_.settings());
    if (!product.ok()) {
      fail_device("build-failed", product.error());
      continue;
    }

    auto snap = store_.put_snapshot(product.value().pre_snapshot);
    if (!snap.ok()) {
      fail_device("build-failed", make_error("build-failed(store)", snap.error().message));
      continue;
    }
    auto stored = store_.store_package(product.value().package, now_);
    if (!stored.ok()) {
      fail_device("build-failed", make_error("build-failed(store)", stored.error().message));
      continue;
    }

    if (paranoid_recheck_) {
      GateDecision recheck = scheduler_.safety_gate(commission, device_id, now_);
      if (!recheck.allowed) {
        events_.append(now_, 4, "gate-recheck-failed",
                       Json{{"commission", commission_id}, {"device", device_id},
                            {"reason", recheck.reason}});
      }
    }

    scheduler_.dispatch(device_id, commission_id);
    auto projected =
        apply_post_conditions(inputs.value().device_state, commission, ofm_);
    if (projected.ok()) {
      scheduler_.note_inflight(device_id, projected.value());
    }
    if (rec->state == CommissionState::Scheduled) {
      ledger_.transition(commission_id, CommissionState::Building, now_);
    }
    ledger_.mark_device(commission_id, device_id, DeviceStage::Building);
    ledger_.set_device_refs(commission_id, device_id, product.value().pre_snapshot.snapshot_id,
                            product.value().package.package_id);
    events_.append(now_, 4, "built",
                   Json{{"commission", commission_id}, {"device", device_id},
                        {"package", product.value().package.package_id},
                        {"snapshot", product.value().pre_snapshot.snapshot_id},
                        {"checksum", product.value().package.checksum}});
    built[commission_id].push_back(product.value().package);
  }

  for (auto& [commission_id, packages] : built) {
    auto rid = rollouts_.plan_rollout(packages, strategy_from_config(), now_, commission_id, *this);
    if (!rid.ok()) {
      events_.append(now_, 4, "plan-error",
                     Json{{"commission", commission_id}, {"message", rid.error().message}});
      continue;
    }
    events_.append(now_, 4, "plan-created",
                   Json{{"rollout", rid.value()}, {"commission", commission_id},
                        {"devices", packages.size()}});
    const TransmissionPlan* plan = rollouts_.find(rid.value());
    for (const auto& [device_id, pd] : plan->devices) {
      if (pd.status == DeliveryStatus::Expired) {
        ledger_.mark_device(commission_id, device_id, DeviceStage::Expired, pd.detail);
        scheduler_.clear_inflight(device_id);
        events_.append(now_, 4, "ship-expired",
                       Json{{"rollout", rid.value()}, {"device", device_id}});
      } else {
        ledger_.mark_device(commission_id, device_id, DeviceStage::Shipping);
        if (pd.status == DeliveryStatus::Deferred) {
          events_.append(now_, 4, "deferred",
                         Json{{"rollout", rid.value()}, {"device", device_id},
                              {"detail", pd.detail}});
        }
      }
    }
    resolve_commission_if_done(commission_id, 4);
  }
}

void World::handle_rollout_results(const RolloutEngine::AdvanceResult& result) {
  for (const auto& t : result.transfers) {
    events_.append(now_, 5, "transfer",
                   Json{{"rollout", t.rollout_id}, {"sender", t.sender},
                        {"receiver", t.receiver}, {"package", t.package_id},
                        {"bytes", t.bytes}});
    SimDevice* receiver = device_mutable(t.receiver);
    if (receiver != nullptr) drain(*receiver, receiver->transfer_drain_pct);
    if (t.sender != "origin") {
      SimDevice* sender = device_mutable(t.sender);
      if (sender != nullptr) drain(*sender, sender->transfer_drain_pct);
    }
  }
  for (const auto& ch : result.changes) {
    switch (ch.status) {
      case DeliveryStatus::Delivered: {
        events_.append(now_, 5, "delivered",
                       Json{{"rollout", ch.rollout_id}, {"device", ch.device_id},
                            {"detail", ch.detail}});
        const CommissionRecord* rec = ledger_.find(ch.commission_id);
        if (rec != nullptr && rec->state == CommissionState::Building) {
          ledger_.transition(ch.commission_id, CommissionState::Shipping, now_);
        }
        break;
      }
      case DeliveryStatus::Deferred:
        events_.append(now_, 5, "deferred",
                       Json{{"rollout", ch.rollout_id}, {"device", ch.device_id}});
        break;
      case DeliveryStatus::Pending:
        events_.append(now_, 5, "deferral-lifted",
                       Json{{"rollout", ch.rollout_id}, {"device", ch.device_id}});
        break;
      case DeliveryStatus::Expired:
        events_.append(now_, 5, "ship-expired",
                       Json{{"rollout", ch.rollout_id}, {"device", ch.device_id}});
        ledger_.mark_device(ch.commission_id, ch.device_id, DeviceStage::Expired,
                            "latest shipping time elapsed");
        scheduler_.clear_inflight(ch.device_id);
        resolve_commission_if_done(ch.commission_id, 5);
        break;
      default:
        break;
    }
  }
}

// phase 5 — rollout advance
void World::phase_rollout() {
  current_phase_ = 5;
  auto result = rollouts_.advance_all(now_, *this);
  handle_rollout_results(result);
}

World::ExecResult World::execute_package(SimDevice& dev, const std::string& package_bytes) {
  auto parsed = ConfigurationPackage::from_file_bytes(package_bytes, config_.mac_secret);
  if (!parsed.ok()) {
    return {false, "integrity: " + parsed.error().message};
  }
  const ConfigurationPackage& pkg = parsed.value();

  // Transactional apply: mutate a working copy, commit only if every verify
  // instruction passes.
  std::map<std::string, Json> values = dev.live.current_values;
  std::map<std::string, int> services = dev.live.provided_services;

  for (const auto& ins : pkg.artifact.instructions) {
    switch (ins.op) {
      case Instruction::Op::Set:
        values[ins.path] = ins.value;
        break;
      case Instruction::Op::Exec: {
        std::istringstream cmd(ins.command);
        std::string word0, word1, name;
        int level = 0;
        cmd >> word0 >> word1 >> name >> level;
        if (word0 == "svc" && word1 == "raise" && !name.empty()) {
          int& cur = services[name];
          cur = std::max(cur, level);
        }
        // Other commands are acknowledged without effect.
        break;
      }
      case Instruction::Op::Verify: {
        if (!ins.service.empty()) {
          auto it = services.find(ins.service);
          if (it == services.end() || it->second < ins.min_level) {
            return {false, "verify failed: service " + ins.service};
          }
        } else {
          auto it = values.find(ins.path);
          if (it == values.end() || it->second != ins.value) {
            return {false, "verify failed: " + ins.path};
          }
        }
        break;
      }
    }
  }

  dev.live.current_values = std::move(values);
  dev.live.provided_services = std::move(services);
  return {true, ""};
}

// phase 6 — agent execution of delivered packages
void World::phase_execute() {
  current_phase_ = 6;
  for (const auto& pe : rollouts_.pending_executions(now_)) {
    SimDevice* dev = device_mutable(pe.device_id);
    if (dev == nullptr) continue;
    if (!dev->live.online) continue; // retried once back online
    if (dev->busy_at(now_) && !pe.interrupt_allowed) {
      events_.append(now_, 6, "exec-deferred",
                     Json{{"device", pe.device_id}, {"package", pe.package_id},
                          {"detail", "device busy, interrupts not allowed"}});
      continue;
    }

    ExecResult res;
    if (dev->exec_fail_until > now_) {
      res = {false, "injected"};
    } else {
      auto bytes = store_.get_package_bytes(pe.package_id, now_);
      if (!bytes.ok()) {
        res = {false, "store: " + bytes.error().message};
      } else {
        res = execute_package(*dev, bytes.value());
      }
    }
    drain(*dev, dev->exec_drain_pct);

    auto outcome = rollouts_.record_execution(pe.rollout_id, pe.device_id, now_, res.success,
                                              res.detail, static_cast<int>(config_.retry_budget));
    if (!outcome.ok()) continue;
    const DeliveryReceipt& receipt = outcome.value().receipt;
    events_.append(now_, 6, res.success ? "executed" : "exec-failed",
                   Json{{"rollout", pe.rollout_id}, {"receipt", receipt.to_json()}});

    if (outcome.value().status == DeliveryStatus::Executed) {
      ledger_.mark_device(pe.commission_id, pe.device_id, DeviceStage::Succeeded);
      pending_report_.insert(pe.device_id);
      resolve_commission_if_done(pe.commission_id, 6);
    } else if (outcome.value().status == DeliveryStatus::Failed) {
      ledger_.mark_device(pe.commission_id, pe.device_id, DeviceStage::Failed, res.detail);
      scheduler_.clear_inflight(pe.device_id);
      resolve_commission_if_done(pe.commission_id, 6);
    }
  }
}

void World::push_report(SimDevice& dev) {
  dev.live.last_updated = now_;
  auto accepted = registry_.update_state(dev.description.device_id, dev.live);
  if (accepted.ok()) {
    events_.append(now_, 7, "report",
                   Json{{"device", dev.description.device_id}, {"tick", now_}});
  } else {
    events_.append(now_, 7, "report-rejected",
                   Json{{"device", dev.description.device_id},
                        {"category", accepted.error().category}});
  }
}

// phase 7 — periodic state reports plus immediate post-execution reports
void World::phase_reports() {
  current_phase_ = 7;
  for (auto& [id, dev] : devices_) {
    if (!dev.live.online) continue;
    bool periodic = dev.report_period > 0 &&
                    (now_ % dev.report_period) == (dev.report_phase % dev.report_period);
    bool after_exec = pending_report_.count(id) > 0;
    if (!periodic && !after_exec) continue;
    push_report(dev);
    if (after_exec) {
      pending_report_.erase(id);
      scheduler_.clear_inflight(id);
    }
  }
}

// phase 8 — revert emission for completed commissions whose time has come
void World::phase_reverts() {
  current_phase_ = 8;
  CommissionLedger::SnapshotLoader loader =
      [this](const SnapshotId& id) -> Result<std::map<std::string, Json>> {
    auto snap = store_.get_snapshot(id);
    if (!snap.ok()) return snap.error();
    return snap.value().values;
  };

  std::vector<CommissionId> due;
  for (const CommissionRecord* rec : ledger_.all()) {
    if (rec->state != CommissionState::Completed) continue;
    if (!rec->commission.revert_at || *rec->commission.revert_at > now_) continue;
    if (rec->reverts_fired) continue;
    due.push_back(rec->commission.commission_id);
  }
  for (const auto& id : due) {
    size_t notes_before = ledger_.find(id)->notes.size();
    auto reverts = ledger_.emit_revert(id, now_, loader, config_.revert_window);
    const CommissionRecord* rec = ledger_.find(id);
    for (size_t i = notes_before; i < rec->notes.size(); ++i) {
      events_.append(now_, 8, "revert-impossible",
                     Json{{"commission", id}, {"note", rec->notes[i]}});
    }
    for (auto& revert : reverts) {
      CommissionId child_id = revert.commission_id;
      auto submitted = submit_commission(std::move(revert));
      if (submitted.ok()) {
        ledger_.link_revert(child_id, id);
        events_.append(now_, 8, "revert-emitted",
                       Json{{"commission", id}, {"revert", child_id}});
      }
    }
  }
}

void World::resolve_commission_if_done(const CommissionId& id, int phase) {
  if (!ledger_.try_resolve(id, now_)) return;
  const CommissionRecord* rec = ledger_.find(id);
  events_.append(now_, phase, commission_state_name(rec->state),
                 Json{{"commission", id}});
  if (rec->state == CommissionState::Completed && rec->revert_parent) {
    ledger_.note_revert_completed(id, now_);
    const CommissionRecord* parent = ledger_.find(*rec->revert_parent);
    if (parent != nullptr && parent->state == CommissionState::Reverted) {
      events_.append(now_, phase, "reverted", Json{{"commission", *rec->revert_parent}});
    }
  }
  // Optional cleanup for partially shipped scenario-wide commissions: restore
  // the members that did succeed.
  if (rec->state == CommissionState::Rejected && config_.revert_partial_rollouts &&
      !rec->revert_parent) {
    for (const auto& [device, pipeline] : rec->devices) {
      if (pipeline.stage != DeviceStage::Succeeded || pipeline.pre_snapshot.empty()) continue;
      auto snapshot = store_.get_snapshot(pipeline.pre_snapshot);
      if (!snapshot.ok()) {
        ledger_.add_note(id, "partial-revert impossible for " + device);
        continue;
      }
      Commission restore;
      restore.commission_id = id + "-restore-" + device;
      restore.source = "system";
      restore.importance = rec->commission.importance;
      restore.window = {now_, now_ + config_.revert_window};
      restore.targets = {device};
      for (const auto& [path, value] : snapshot.value().values) {
        PostCondition pc;
        pc.kind = PostCondition::Kind::SetValue;
        pc.path = path;
        pc.value = value;
        restore.required.push_back(std::move(pc));
      }
      auto submitted = submit_commission(std::move(restore));
      if (submitted.ok()) {
        events_.append(now_, phase, "partial-revert",
                       Json{{"commission", id}, {"device", device},
                            {"restore", submitted.value()}});
      }
    }
  }
}

Status World::audit() {
  for (const auto& [sid, scenario] : catalog_.all()) {
    std::map<DeviceId, DeviceState> states;
    for (const auto& member : scenario.member_devices) {
      auto st = registry_.get_state(member, now_);
      if (!st.ok()) {
        return make_error("audit-violation", "scenario " + sid + ": " + st.error().message);
      }
      states.emplace(member, st.value().state);
    }
    for (size_t i = 0; i < scenario.constraints.size(); ++i) {
      auto verdict = evaluate_constraint(scenario.constraints[i], states);
      std::string which = sid + "/c" + std::to_string(i);
      if (!verdict.ok()) {
        events_.append(now_, 9, "audit-violation",
                       Json{{"constraint", which}, {"error", verdict.error().message}});
        return make_error("audit-violation",
                          which + " evaluation error: " + verdict.error().message);
      }
      if (!verdict.value()) {
        events_.append(now_, 9, "audit-violation",
                       Json{{"constraint", which},
                            {"text", scenario.constraints[i].text}});
        return make_error("audit-violation", which + " violated: " +
                                                 scenario.constraints[i].text);
      }
    }
  }
  return Status::ok_status();
}

Status World::step() {
  if (!initialized_) return make_error("lifecycle", "world not initialized");
  phase_faults();
  phase_renewal();
  phase_intake();
  phase_schedule_and_build();
  phase_rollout();
  phase_execute();
  phase_reports();
  phase_reverts();
  Status audited = audit();
  if (!audited.ok()) return audited;
  ++now_;
  return Status::ok_status();
}

Status World::run_until(Tick end_tick) {
  while (now_ < end_tick) {
    Status s = step();
    if (!s.ok()) return s;
  }
  return Status::ok_status();
}

bool World::quiescent() const {
  if (!scheduled_commissions_.empty()) return false;
  if (!rollouts_.all_done()) return false;
  for (const CommissionRecord* rec : ledger_.all()) {
    if (!commission_state_terminal(rec->state)) return false;
    if (rec->state == CommissionState::Completed && rec->commission.revert_at &&
        !rec->reverts_fired) {
      return false;
    }
  }
  return true;
}

Status World::run_to_quiescence(Tick max_ticks) {
  Tick limit = now_ + max_ticks;
  while (now_ < limit && !quiescent()) {
    Status s = step();
    if (!s.ok()) return s;
  }
  return Status::ok_status();
}

Json World::save_state() const {
  Json devices = Json::object();
  for (const auto& [id, dev] : devices_) {
    Json fired = Json::array();
    for (const auto& w : dev.watches) fired.push_back(w.fired);
    devices[id] = Json{{"live", dev.live.to_json()},
                       {"offline_until", dev.offline_until},
                       {"dropping_until", dev.dropping_until},
                       {"exec_fail_until", dev.exec_fail_until},
                       {"watch_fired", fired}};
  }
  Json registry = Json::object();
  for (const auto& id : registry_.device_ids()) {
    registry[id] = registry_.get_state(id, now_).value().state.to_json();
  }
  Json scheduled = Json::array();
  for (const auto& [at, c] : scheduled_commissions_) {
    scheduled.push_back(Json{{"at", at}, {"commission", c.to_json()}});
  }
  Json pending_reports = Json::array();
  for (const auto& id : pending_report_) pending_reports.push_back(id);
  return Json{{"tick", now_},
              {"devices", devices},
              {"registry", registry},
              {"ledger", ledger_.save()},
              {"scheduler", scheduler_.save()},
              {"rollouts", rollouts_.save()},
              {"scheduled_commissions", scheduled},
              {"pending_reports", pending_reports}};
}

Status World::restore_state(const Json& j) {
  if (!initialized_) return make_error("lifecycle", "init before restore");
  now_ = j.value("tick", Tick{0});
  const Json devices_obj = j.value("devices", Json::object());
  for (const auto& [id, dj] : devices_obj.items()) {
    SimDevice* dev = device_mutable(id);
    if (dev == nullptr) {
      return make_error("validation", "state references unknown device " + id);
    }
    auto live = DeviceState::from_json(dj.at("live"));
    if (!live.ok()) return live.error();
    dev->live = live.value();
    dev->offline_until = dj.value("offline_until", Tick{0});
    dev->dropping_until = dj.value("dropping_until", Tick{0});
    dev->exec_fail_until = dj.value("exec_fail_until", Tick{0});
    const Json& fired = dj.value("watch_fired", Json::array());
    for (size_t i = 0; i < dev->watches.size() && i < fired.size(); ++i) {
      dev->watches[i].fired = fired[i].get<bool>();
    }
  }
  const Json registry_obj = j.value("registry", Json::object());
  for (const auto& [id, sj] : registry_obj.items()) {
    auto state = DeviceState::from_json(sj);
    if (!state.ok()) return state.error();
    auto updated = registry_.update_state(id, state.value());
    if (!updated.ok()) return updated.error();
  }
  auto ledger_ok = ledger_.restore(j.value("ledger", Json::object()));
  if (!ledger_ok.ok()) return ledger_ok;
  auto sched_ok = scheduler_.restore(j.value("scheduler", Json::object()));
  if (!sched_ok.ok()) return sched_ok;
  auto roll_ok = rollouts_.restore(j.value("rollouts", Json::object()));
  if (!roll_ok.ok()) return roll_ok;
  scheduled_commissions_.clear();
  for (const auto& cj : j.value("scheduled_commissions", Json::array())) {
    auto c = Commission::from_json(cj.at("commission"));
    if (!c.ok()) return c.error();
    scheduled_commissions_.emplace(cj.value("at", Tick{0}), c.value());
  }
  pending_report_.clear();
  for (const auto& id : j.value("pending_reports", Json::array())) {
    pending_report_.insert(id.get<std::string>());
  }
  return Status::ok_status();
}

std::set<SnapshotId> World::pinned_snapshots() const {
  std::set<SnapshotId> pinned;
  for (const CommissionRecord* rec : ledger_.all()) {
    bool needs = !commission_state_terminal(rec->state) ||
                 (rec->state == CommissionState::Completed && rec->commission.revert_at &&
                  !rec->reverts_fired);
    if (!needs) continue;
    for (const auto& [device, pipeline] : rec->devices) {
      (void)device;
      if (!pipeline.pre_snapshot.empty()) pinned.insert(pipeline.pre_snapshot);
    }
  }
  return pinned;
}

// ---------------------------------------------------------------------------
// Document loading
// ---------------------------------------------------------------------------

Result<SimDevice> sim_device_from_json(const Json& j, const OrganisationalFeatureModel& ofm) {
  if (!j.is_object() || !j.contains("description")) {
    return make_error("parse", "device entry needs description");
  }
  SimDevice dev;
  auto desc = DeviceDescription::from_json(j["description"]);
  if (!desc.ok()) return desc.error();
  dev.description = desc.value();
  dev.live = initial_state_from_description(dev.description, ofm, 0);

  if (j.contains("state")) {
    const Json& s = j["state"];
    const Json services_obj = s.value("services", Json::object());
    for (const auto& [name, level] : services_obj.items()) {
      if (!level.is_number_integer()) {
        return make_error("parse", "service level must be an integer");
      }
      dev.live.provided_services[name] = level.get<int>();
    }
    const Json values_obj = s.value("values", Json::object());
    for (const auto& [path, value] : values_obj.items()) {
      dev.live.current_values[path] = value;
    }
    dev.live.charge_pct = s.value("charge_pct", dev.live.charge_pct);
    dev.live.online = s.value("online", true);
  }

  if (j.contains("agent")) {
    const Json& a = j["agent"];
    dev.report_period = a.value("report_period", dev.report_period);
    dev.report_phase = a.value("report_phase", dev.report_phase);
    if (a.contains("poll_phase")) dev.poll_phase = a["poll_phase"].get<Tick>();
    if (a.contains("staleness_threshold")) {
      dev.staleness_threshold = a["staleness_threshold"].get<Tick>();
    }
    dev.auth_token = a.value("auth_token", "");
  }
  if (j.contains("power")) {
    const Json& p = j["power"];
    dev.idle_drain_pct_per_tick = p.value("idle_drain_pct_per_tick", 0.0);
    dev.exec_drain_pct = p.value("exec_drain_pct", 0.0);
    dev.transfer_drain_pct = p.value("transfer_drain_pct", 0.0);
  }
  for (const auto& fj : j.value("faults", Json::array())) {
    FaultSpec f;
    f.at = fj.value("at", Tick{0});
    f.kind = fj.value("kind", "");
    f.duration = fj.value("duration", Tick{1});
    if (f.kind != "offline" && f.kind != "drop-message" && f.kind != "exec-fail") {
      return make_error("parse", "unknown fault kind: " + f.kind);
    }
    dev.faults.push_back(f);
  }
  for (const auto& rj : j.value("recharges", Json::array())) {
    dev.recharges.push_back({rj.value("at", Tick{0}), rj.value("amount", 0.0)});
  }
  if (j.contains("duty")) {
    dev.duty.period = j["duty"].value("period", Tick{0});
    dev.duty.busy_len = j["duty"].value("busy_len", Tick{0});
  }
  for (const auto& wj : j.value("watches", Json::array())) {
    WatchRule w;
    w.path = wj.value("path", "");
    if (wj.contains("below")) w.below = wj["below"].get<double>();
    if (wj.contains("above")) w.above = wj["above"].get<double>();
    w.commission_template = wj.value("commission", Json::object());
    dev.watches.push_back(std::move(w));
  }
  return dev;
}

Result<FleetBootstrap> fleet_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("ofm")) {
    return make_error("parse", "fleet document needs an ofm");
  }
  FleetBootstrap fleet;
  Json ofm_doc = j["ofm"];
  if (ofm_doc.is_string()) {
    auto loaded = load_document(ofm_doc.get<std::string>());
    if (!loaded.ok()) return loaded.error();
    ofm_doc = loaded.value();
  }
  auto ofm = OrganisationalFeatureModel::from_json(ofm_doc);
  if (!ofm.ok()) return ofm.error();
  fleet.ofm = ofm.value();
  auto ofm_ok = fleet.ofm.validate(DeviceFeatureMetamodel::standard());
  if (!ofm_ok.ok()) return ofm_ok.error();

  for (const auto& dj : j.value("devices", Json::array())) {
    auto dev = sim_device_from_json(dj, fleet.ofm);
    if (!dev.ok()) return dev.error();
    fleet.devices.push_back(dev.value());
  }
  for (const auto& sj : j.value("scenarios", Json::array())) {
    auto scenario = BusinessScenario::from_json(sj);
    if (!scenario.ok()) return scenario.error();
    fleet.scenarios.push_back(scenario.value());
  }
  return fleet;
}

Result<ScenarioRun> scenario_run_from_json(const Json& j, const RunConfig& base) {
  if (!j.is_object()) return make_error("parse", "scenario run must be an object");
  ScenarioRun run;

  Json config_json = base.to_json();
  if (j.contains("config")) {
    for (const auto& [k, v] : j["config"].items()) config_json[k] = v;
  }
  for (const char* key : {"policy", "strategy", "seed", "staleness_threshold"}) {
    if (j.contains(key)) config_json[key] = j[key];
  }
  auto config = RunConfig::from_json(config_json);
  if (!config.ok()) return config.error();
  run.config = config.value();

  if (j.contains("fleet") && j["fleet"].is_object()) {
    auto fleet = fleet_from_json(j["fleet"]);
    if (!fleet.ok()) return fleet.error();
    run.fleet = fleet.value();
  } else if (j.contains("fleet") && j["fleet"].is_string()) {
    auto doc = load_document(j["fleet"].get<std::string>());
    if (!doc.ok()) return doc.error();
    auto fleet = fleet_from_json(doc.value());
    if (!fleet.ok()) return fleet.error();
    run.fleet = fleet.value();
  } else {
    return make_error("parse", "scenario run needs a fleet (inline or path)");
  }

  for (const auto& cj : j.value("commissions", Json::array())) {
    Tick at = cj.value("at", Tick{0});
    auto c = Commission::from_json(cj.at("commission"));
    if (!c.ok()) return c.error();
    run.schedule.emplace_back(at, c.value());
  }
  std::stable_sort(run.schedule.begin(), run.schedule.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return run;
}

} // namespace confab
