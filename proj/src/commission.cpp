#include "confab/commission.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace confab {

Json PostCondition::to_json() const {
  if (kind == Kind::SetValue) {
    return Json{{"kind", "set-value"}, {"path", path}, {"value", value}};
  }
  return Json{{"kind", "provide-service"}, {"service", service}, {"min_level", min_level}};
}

Result<PostCondition> PostCondition::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("kind")) {
    return make_error("parse", "post-condition needs kind");
  }
  PostCondition pc;
  std::string kind = j["kind"].get<std::string>();
  if (kind == "set-value") {
    pc.kind = Kind::SetValue;
    if (!j.contains("path") || !j.contains("value")) {
      return make_error("parse", "set-value needs path and value");
    }
    pc.path = j["path"].get<std::string>();
    pc.value = j["value"];
    return pc;
  }
  if (kind == "provide-service") {
    pc.kind = Kind::ProvideService;
    if (!j.contains("service")) return make_error("parse", "provide-service needs service");
    pc.service = j["service"].get<std::string>();
    pc.min_level = j.value("min_level", 1);
    if (pc.min_level < 0 || pc.min_level > 10) {
      return make_error("parse", "min_level outside [0,10]");
    }
    return pc;
  }
  return make_error("parse", "unknown post-condition kind: " + kind);
}

Json Commission::to_json() const {
  Json j;
  j["commission_id"] = commission_id;
  j["source"] = source;
  j["importance"] = importance;
  j["window"] = Json{{"earliest", window.earliest}, {"latest", window.latest}};
  if (revert_at) j["revert_at"] = *revert_at;
  Json t = Json::array();
  for (const auto& target : targets) t.push_back(target);
  j["targets"] = std::move(t);
  Json req = Json::array();
  for (const auto& pc : required) req.push_back(pc.to_json());
  j["required"] = std::move(req);
  j["submitted_at"] = submitted_at;
  return j;
}

Result<Commission> Commission::from_json(const Json& j) {
  if (!j.is_object()) return make_error("parse", "commission must be an object");
  Commission c;
  c.commission_id = j.value("commission_id", "");
  c.source = j.value("source", "");
  if (!j.contains("importance") || !j["importance"].is_number_integer()) {
    return make_error("parse", "commission needs integer importance");
  }
  c.importance = j["importance"].get<long>();
  if (!j.contains("window") || !j["window"].is_object()) {
    return make_error("parse", "commission needs window {earliest, latest}");
  }
  c.window.earliest = j["window"].value("earliest", Tick{0});
  c.window.latest = j["window"].value("latest", Tick{0});
  if (j.contains("revert_at")) c.revert_at = j["revert_at"].get<Tick>();
  for (const auto& t : j.value("targets", Json::array())) {
    c.targets.insert(t.get<std::string>());
  }
  for (const auto& pj : j.value("required", Json::array())) {
    auto pc = PostCondition::from_json(pj);
    if (!pc.ok()) return pc.error();
    c.required.push_back(pc.value());
  }
  c.submitted_at = j.value("submitted_at", Tick{0});
  return c;
}

const char* commission_state_name(CommissionState s) {
  switch (s) {
    case CommissionState::Submitted: return "submitted";
    case CommissionState::Scheduled: return "scheduled";
    case CommissionState::Building: return "building";
    case CommissionState::Shipping: return "shipping";
    case CommissionState::Completed: return "completed";
    case CommissionState::Rejected: return "rejected";
    case CommissionState::Expired: return "expired";
    case CommissionState::Reverted: return "reverted";
  }
  return "unknown";
}

bool commission_state_terminal(CommissionState s) {
  return s == CommissionState::Completed || s == CommissionState::Rejected ||
         s == CommissionState::Expired || s == CommissionState::Reverted;
}

const char* device_stage_name(DeviceStage s) {
  switch (s) {
    case DeviceStage::Pending: return "pending";
    case DeviceStage::Building: return "building";
    case DeviceStage::Shipping: return "shipping";
    case DeviceStage::Succeeded: return "succeeded";
    case DeviceStage::Failed: return "failed";
    case DeviceStage::Expired: return "expired";
  }
  return "unknown";
}

namespace {

bool transition_allowed(CommissionState from, CommissionState to) {
  using S = CommissionState;
  switch (from) {
    case S::Submitted:
      return to == S::Scheduled || to == S::Rejected || to == S::Expired;
    case S::Scheduled:
      return to == S::Building || to == S::Rejected || to == S::Expired;
    case S::Building:
      return to == S::Shipping || to == S::Rejected || to == S::Expired;
    case S::Shipping:
      return to == S::Completed || to == S::Rejected || to == S::Expired;
    case S::Completed:
      return to == S::Reverted;
    default:
      return false;
  }
}

} // namespace

Json CommissionRecord::to_json() const {
  Json j;
  j["commission"] = commission.to_json();
  j["state"] = commission_state_name(state);
  Json lg = Json::array();
  for (const auto& tr : log) {
    Json e{{"tick", tr.tick},
           {"from", commission_state_name(tr.from)},
           {"to", commission_state_name(tr.to)}};
    if (!tr.note.empty()) e["note"] = tr.note;
    lg.push_back(std::move(e));
  }
  j["log"] = std::move(lg);
  Json devs = Json::object();
  for (const auto& [d, p] : devices) {
    Json e{{"stage", device_stage_name(p.stage)}};
    if (!p.pre_snapshot.empty()) e["pre_snapshot"] = p.pre_snapshot;
    if (!p.package_id.empty()) e["package_id"] = p.package_id;
    if (!p.detail.empty()) e["detail"] = p.detail;
    devs[d] = std::move(e);
  }
  j["devices"] = std::move(devs);
  if (!notes.empty()) j["notes"] = notes;
  return j;
}

namespace {

Result<CommissionState> state_from_name(const std::string& name) {
  for (CommissionState s : {CommissionState::Submitted, CommissionState::Scheduled,
                            CommissionState::Building, CommissionState::Shipping,
                            CommissionState::Completed, CommissionState::Rejected,
                            CommissionState::Expired, CommissionState::Reverted}) {
    if (name == commission_state_name(s)) return s;
  }
  return make_error("parse", "unknown commission state: " + name);
}

Result<DeviceStage> stage_from_name(const std::string& name) {
  for (DeviceStage s : {DeviceStage::Pending, DeviceStage::Building, DeviceStage::Shipping,
                        DeviceStage::Succeeded, DeviceStage::Failed, DeviceStage::Expired}) {
    if (name == device_stage_name(s)) return s;
  }
  return make_error("parse", "unknown device stage: " + name);
}

} // namespace

Result<CommissionRecord> CommissionRecord::from_json(const Json& j) {
  CommissionRecord rec;
  auto c = Commission::from_json(j.at("commission"));
  if (!c.ok()) return c.error();
  rec.commission = c.value();
  auto state = state_from_name(j.value("state", "submitted"));
  if (!state.ok()) return state.error();
  rec.state = state.value();
  for (const auto& tj : j.value("log", Json::array())) {
    StatusTransition tr;
    tr.tick = tj.value("tick", Tick{0});
    auto from = state_from_name(tj.value("from", "submitted"));
    auto to = state_from_name(tj.value("to", "submitted"));
    if (!from.ok() || !to.ok()) return make_error("parse", "bad transition log entry");
    tr.from = from.value();
    tr.to = to.value();
    tr.note = tj.value("note", "");
    rec.log.push_back(std::move(tr));
  }
  const Json devices_obj = j.value("devices", Json::object());
  for (const auto& [device, pj] : devices_obj.items()) {
    DevicePipeline p;
    auto stage = stage_from_name(pj.value("stage", "pending"));
    if (!stage.ok()) return stage.error();
    p.stage = stage.value();
    p.pre_snapshot = pj.value("pre_snapshot", "");
    p.package_id = pj.value("package_id", "");
    p.detail = pj.value("detail", "");
    rec.devices.emplace(device, std::move(p));
  }
  for (const auto& n : j.value("notes", Json::array())) rec.notes.push_back(n.get<std::string>());
  for (const auto& r : j.value("pending_reverts", Json::array())) {
    rec.pending_reverts.insert(r.get<std::string>());
  }
  if (j.contains("revert_parent")) rec.revert_parent = j["revert_parent"].get<std::string>();
  rec.reverts_fired = j.value("reverts_fired", false);
  return rec;
}

Json CommissionLedger::save() const {
  Json records = Json::array();
  for (const auto& [id, rec] : records_) {
    (void)id;
    Json rj = rec.to_json();
    Json reverts = Json::array();
    for (const auto& r : rec.pending_reverts) reverts.push_back(r);
    rj["pending_reverts"] = std::move(reverts);
    if (rec.revert_parent) rj["revert_parent"] = *rec.revert_parent;
    rj["reverts_fired"] = rec.reverts_fired;
    records.push_back(std::move(rj));
  }
  return Json{{"seq", seq_}, {"records", records}};
}

Status CommissionLedger::restore(const Json& j) {
  records_.clear();
  seq_ = j.value("seq", 0L);
  for (const auto& rj : j.value("records", Json::array())) {
    auto rec = CommissionRecord::from_json(rj);
    if (!rec.ok()) return rec.error();
    records_.emplace(rec.value().commission.commission_id, rec.value());
  }
  return Status::ok_status();
}

Result<std::set<DeviceId>> resolve_targets(const Commission& c,
                                           const DeviceRegistry& registry,
                                           const ScenarioCatalog& catalog) {
  std::set<DeviceId> out;
  std::vector<std::string> unresolved;
  for (const auto& name : c.targets) {
    if (registry.has_device(name)) {
      out.insert(name);
      continue;
    }
    const BusinessScenario* scenario = catalog.find(name);
    if (scenario != nullptr) {
      out.insert(scenario->member_devices.begin(), scenario->member_devices.end());
      continue;
    }
    unresolved.push_back(name);
  }
  if (!unresolved.empty()) {
    std::ostringstream msg;
    msg << "unresolvable targets:";
    for (const auto& u : unresolved) msg << ' ' << u;
    return make_error("unresolved-target", msg.str());
  }
  return out;
}

CommissionId CommissionLedger::next_id() {
  std::ostringstream id;
  id << "c-" << std::setw(4) << std::setfill('0') << ++seq_;
  return id.str();
}

Result<CommissionId> CommissionLedger::submit(Commission c, Tick now) {
  if (c.commission_id.empty()) c.commission_id = next_id();
  if (records_.count(c.commission_id) > 0) {
    return make_error("conflict", "commission id already used: " + c.commission_id);
  }
  c.submitted_at = now;

  auto record_terminal = [&](CommissionState state, const std::string& category,
                             const std::string& note) -> Result<CommissionId> {
    CommissionRecord rec;
    rec.commission = c;
    rec.state = state;
    rec.log.push_back({now, state, state, note});
    records_.emplace(c.commission_id, std::move(rec));
    return make_error(category, note + " (" + c.commission_id + ")");
  };

  if (c.targets.empty()) {
    return record_terminal(CommissionState::Rejected, "validation", "no targets named");
  }
  if (c.required.empty()) {
    return record_terminal(CommissionState::Rejected, "validation", "empty post-condition list");
  }
  if (c.window.latest < c.window.earliest) {
    return record_terminal(CommissionState::Rejected, "validation", "window inverted");
  }
  if (c.revert_at && *c.revert_at <= c.window.latest) {
    return record_terminal(CommissionState::Rejected, "validation",
                           "revert_at must fall after the window");
  }
  if (c.importance < 0) {
    return record_terminal(CommissionState::Rejected, "validation", "negative importance");
  }
  if (c.window.latest < now) {
    return record_terminal(CommissionState::Expired, "expired",
                           "window closed before submission");
  }

  auto resolved = resolve_targets(c, *registry_, *catalog_);
  if (!resolved.ok()) {
    return record_terminal(CommissionState::Rejected, resolved.error().category,
                           resolved.error().message);
  }

  const auto& ofm = registry_->ofm();
  for (const auto& pc : c.required) {
    if (pc.kind != PostCondition::Kind::SetValue) continue;
    const VariationPoint* vp = ofm.find_point(pc.path);
    if (vp == nullptr) {
      return record_terminal(CommissionState::Rejected, "validation",
                             "post-condition path is not a variation point: " + pc.path);
    }
    if (vp->access == Access::ReadOnly || vp->invariant) {
      return record_terminal(CommissionState::Rejected, "validation",
                             "post-condition targets a non-configurable point: " + pc.path);
    }
  }

  CommissionRecord rec;
  rec.commission = c;
  rec.state = CommissionState::Submitted;
  rec.log.push_back({now, CommissionState::Submitted, CommissionState::Submitted, ""});
  for (const auto& d : resolved.value()) {
    rec.devices.emplace(d, DevicePipeline{});
  }
  CommissionId id = c.commission_id;
  records_.emplace(id, std::move(rec));
  return id;
}

Status CommissionLedger::transition(const CommissionId& id, CommissionState to, Tick now,
                                    const std::string& note) {
  auto it = records_.find(id);
  if (it == records_.end()) return make_error("not-found", "unknown commission: " + id);
  CommissionRecord& rec = it->second;
  if (!transition_allowed(rec.state, to)) {
    return make_error("lifecycle", std::string("illegal transition ") +
                                       commission_state_name(rec.state) + " -> " +
                                       commission_state_name(to));
  }
  if (!rec.log.empty() && now <= rec.log.back().tick) {
    return make_error("lifecycle", "transition tick not strictly increasing");
  }
  rec.log.push_back({now, rec.state, to, note});
  rec.state = to;
  return Status::ok_status();
}

Status CommissionLedger::mark_device(const CommissionId& id, const DeviceId& device,
                                     DeviceStage stage, const std::string& detail) {
  auto it = records_.find(id);
  if (it == records_.end()) return make_error("not-found", "unknown commission: " + id);
  auto dit = it->second.devices.find(device);
  if (dit == it->second.devices.end()) {
    return make_error("not-found", "device not targeted by commission: " + device);
  }
  dit->second.stage = stage;
  if (!detail.empty()) dit->second.detail = detail;
  return Status::ok_status();
}

Status CommissionLedger::set_device_refs(const CommissionId& id, const DeviceId& device,
                                         const SnapshotId& snapshot, const PackageId& package) {
  auto it = records_.find(id);
  if (it == records_.end()) return make_error("not-found", "unknown commission: " + id);
  auto dit = it->second.devices.find(device);
  if (dit == it->second.devices.end()) {
    return make_error("not-found", "device not targeted by commission: " + device);
  }
  dit->second.pre_snapshot = snapshot;
  dit->second.package_id = package;
  return Status::ok_status();
}

std::vector<Commission> CommissionLedger::emit_revert(const CommissionId& id, Tick now,
                                                      const SnapshotLoader& loader,
                                                      Tick revert_window) {
  std::vector<Commission> out;
  auto it = records_.find(id);
  if (it == records_.end()) return out;
  CommissionRecord& rec = it->second;
  // Fires at revert_at, or as soon after as the commission is completed.
  if (rec.state != CommissionState::Completed || !rec.commission.revert_at ||
      *rec.commission.revert_at > now || rec.reverts_fired) {
    return out;
  }
  rec.reverts_fired = true;
  for (const auto& [device, pipeline] : rec.devices) {
    if (pipeline.stage != DeviceStage::Succeeded) continue;
    if (pipeline.pre_snapshot.empty()) {
      rec.notes.push_back("revert-impossible: no snapshot for " + device);
      continue;
    }
    auto values = loader(pipeline.pre_snapshot);
    if (!values.ok()) {
      rec.notes.push_back("revert-impossible: snapshot " + pipeline.pre_snapshot +
                          " unavailable (" + values.error().category + ")");
      continue;
    }
    Commission revert;
    revert.commission_id = id + "-revert-" + device;
    revert.source = "system";
    revert.importance = rec.commission.importance;
    revert.window = {now, now + revert_window};
    revert.targets = {device};
    for (const auto& [path, value] : values.value()) {
      PostCondition pc;
      pc.kind = PostCondition::Kind::SetValue;
      pc.path = path;
      pc.value = value;
      revert.required.push_back(std::move(pc));
    }
    rec.pending_reverts.insert(revert.commission_id);
    out.push_back(std::move(revert));
  }
  return out;
}

bool CommissionLedger::try_resolve(const CommissionId& id, Tick now) {
  auto it = records_.find(id);
  if (it == records_.end()) return false;
  CommissionRecord& rec = it->second;
  if (commission_state_terminal(rec.state)) return false;

  size_t succeeded = 0, failed = 0, expired = 0;
  for (const auto& [d, p] : rec.devices) {
    (void)d;
    switch (p.stage) {
      case DeviceStage::Succeeded: ++succeeded; break;
      case DeviceStage::Failed: ++failed; break;
      case DeviceStage::Expired: ++expired; break;
      default:
        return false; // work remains
    }
  }
  std::ostringstream detail;
  detail << succeeded << "/" << rec.devices.size() << " devices succeeded";
  Status st = Status::ok_status();
  if (succeeded == rec.devices.size()) {
    st = transition(id, CommissionState::Completed, now, detail.str());
  } else if (succeeded > 0) {
    st = transition(id, CommissionState::Rejected, now, "partial: " + detail.str());
  } else if (failed > 0) {
    st = transition(id, CommissionState::Rejected, now, detail.str());
  } else {
    st = transition(id, CommissionState::Expired, now, detail.str());
  }
  return st.ok();
}

void CommissionLedger::link_revert(const CommissionId& child, const CommissionId& parent) {
  auto it = records_.find(child);
  if (it != records_.end()) it->second.revert_parent = parent;
}

void CommissionLedger::note_revert_completed(const CommissionId& child, Tick now) {
  auto it = records_.find(child);
  if (it == records_.end() || !it->second.revert_parent) return;
  const CommissionId parent_id = *it->second.revert_parent;
  auto pit = records_.find(parent_id);
  if (pit == records_.end()) return;
  pit->second.pending_reverts.erase(child);
  if (pit->second.pending_reverts.empty() && pit->second.state == CommissionState::Completed) {
    transition(parent_id, CommissionState::Reverted, now, "all revert commissions completed");
  }
}

const CommissionRecord* CommissionLedger::find(const CommissionId& id) const {
  auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

CommissionRecord* CommissionLedger::find_mutable(const CommissionId& id) {
  auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

std::vector<const CommissionRecord*> CommissionLedger::all() const {
  std::vector<const CommissionRecord*> out;
  for (const auto& [id, rec] : records_) {
    (void)id;
    out.push_back(&rec);
  }
  return out;
}

void CommissionLedger::add_note(const CommissionId& id, const std::string& note) {
  auto it = records_.find(id);
  if (it != records_.end()) it->second.notes.push_back(note);
}

} // namespace confab
