#include "confab/stores.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace confab {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// ArtifactStore
// ---------------------------------------------------------------------------

Status ArtifactStore::put_component(TransformationComponent component) {
  auto& slot = components_[component.key];
  for (const auto& existing : slot) {
    if (existing.os_versions.overlaps(component.os_versions)) {
      return make_error("conflict", "overlapping version range for key " +
                                        component.key.to_string() + ": " +
                                        existing.os_versions.text() + " vs " +
                                        component.os_versions.text());
    }
  }
  slot.push_back(std::move(component));
  return Status::ok_status();
}

Result<TransformationComponent> ArtifactStore::resolve_component(const ComponentKey& key,
                                                                 const Version& os_version) const {
  auto it = components_.find(key);
  if (it != components_.end()) {
    for (const auto& c : it->second) {
      if (c.os_versions.contains(os_version)) return c;
    }
    return make_error("not-found", "no component for " + key.to_string() + " covering os " +
                                       os_version.to_string());
  }
  // Nearest-key hint: same kind and name, any platform/os.
  for (const auto& [k, list] : components_) {
    (void)list;
    if (k.kind == key.kind && k.name == key.name) {
      return make_error("not-found", "no component for " + key.to_string() +
                                         "; nearest key " + k.to_string());
    }
  }
  return make_error("not-found", "no component for " + key.to_string());
}

std::vector<TransformationComponent> ArtifactStore::list_components() const {
  std::vector<TransformationComponent> out;
  for (const auto& [key, list] : components_) {
    (void)key;
    out.insert(out.end(), list.begin(), list.end());
  }
  return out;
}

size_t ArtifactStore::size() const {
  size_t n = 0;
  for (const auto& [key, list] : components_) {
    (void)key;
    n += list.size();
  }
  return n;
}

// ---------------------------------------------------------------------------
// Snapshot
// ---------------------------------------------------------------------------

Json Snapshot::to_json() const {
  Json values_json = Json::object();
  for (const auto& [p, v] : values) values_json[p] = v;
  return Json{{"snapshot_id", snapshot_id},
              {"device_id", device_id},
              {"values", values_json},
              {"taken_at", taken_at}};
}

Result<Snapshot> Snapshot::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("snapshot_id") || !j.contains("device_id")) {
    return make_error("parse", "snapshot needs snapshot_id and device_id");
  }
  Snapshot s;
  s.snapshot_id = j["snapshot_id"].get<std::string>();
  s.device_id = j["device_id"].get<std::string>();
  const Json values_obj = j.value("values", Json::object());
  for (const auto& [p, v] : values_obj.items()) {
    s.values[p] = v;
  }
  s.taken_at = j.value("taken_at", Tick{0});
  return s;
}

// ---------------------------------------------------------------------------
// ConfigurationStore
// ---------------------------------------------------------------------------

ConfigurationStore::ConfigurationStore(std::string mac_secret)
    : mac_secret_(std::move(mac_secret)) {}

ConfigurationStore::ConfigurationStore(std::string root, std::string mac_secret)
    : root_(std::move(root)), mac_secret_(std::move(mac_secret)) {
  fs::create_directories(fs::path(root_) / "packages");
  fs::create_directories(fs::path(root_) / "snapshots");
  load_from_disk();
}

Result<SnapshotId> ConfigurationStore::put_snapshot(Snapshot snapshot) {
  if (snapshot.snapshot_id.empty()) {
    return make_error("validation", "snapshot id empty");
  }
  auto it = snapshots_.find(snapshot.snapshot_id);
  if (it != snapshots_.end()) {
    // Same id must mean same content; snapshots are immutable.
    if (canonical_compact(it->second.to_json()) != canonical_compact(snapshot.to_json())) {
      return make_error("conflict", "snapshot id reused with different content");
    }
    return snapshot.snapshot_id;
  }
  auto persisted = persist_snapshot(snapshot);
  if (!persisted.ok()) return persisted.error();
  SnapshotId id = snapshot.snapshot_id;
  snapshots_.emplace(id, std::move(snapshot));
  return id;
}

Result<Snapshot> ConfigurationStore::get_snapshot(const SnapshotId& id) const {
  auto it = snapshots_.find(id);
  if (it == snapshots_.end()) return make_error("not-found", "no snapshot " + id);
  return it->second;
}

Status ConfigurationStore::remove_snapshot(const SnapshotId& id) {
  auto it = snapshots_.find(id);
  if (it == snapshots_.end()) return make_error("not-found", "no snapshot " + id);
  snapshots_.erase(it);
  if (!root_.empty()) {
    std::error_code ec;
    fs::remove(fs::path(root_) / "snapshots" / (id + ".json"), ec);
  }
  return Status::ok_status();
}

Status ConfigurationStore::store_package(const ConfigurationPackage& package, Tick now) {
  if (package.package_id.empty()) return make_error("validation", "package id empty");
  std::string bytes = package.file_bytes();
  // Verify on store: reject malformed or unsealed packages outright.
  auto parsed = ConfigurationPackage::from_file_bytes(bytes, mac_secret_);
  if (!parsed.ok()) return parsed.error();
  auto it = meta_.find(package.package_id);
  if (it != meta_.end()) {
    if (bytes_[package.package_id] != bytes) {
      return make_error("conflict", "package id reused with different content: " +
                                        package.package_id);
    }
    return Status::ok_status(); // idempotent re-store
  }
  auto persisted = persist_package(package.package_id, bytes);
  if (!persisted.ok()) return persisted.error();
  StoredPackage sp;
  sp.package = package;
  sp.stored_at = now;
  sp.last_access = now;
  meta_.emplace(package.package_id, std::move(sp));
  bytes_.emplace(package.package_id, std::move(bytes));
  return Status::ok_status();
}

Result<std::string> ConfigurationStore::get_package_bytes(const PackageId& id, Tick now) {
  auto it = meta_.find(id);
  if (it == meta_.end()) return make_error("not-found", "no package " + id);
  it->second.last_access = now;
  return bytes_.at(id);
}

Result<ConfigurationPackage> ConfigurationStore::get_package(const PackageId& id, Tick now) {
  auto bytes = get_package_bytes(id, now);
  if (!bytes.ok()) return bytes.error();
  return ConfigurationPackage::from_file_bytes(bytes.value(), mac_secret_);
}

Status ConfigurationStore::mark_golden(const PackageId& id) {
  auto it = meta_.find(id);
  if (it == meta_.end()) return make_error("not-found", "no package " + id);
  it->second.golden = true;
  return Status::ok_status();
}

ConfigurationStore::GcReport ConfigurationStore::gc(size_t package_capacity,
                                                    size_t snapshot_capacity,
                                                    const std::set<SnapshotId>& pinned_snapshots) {
  GcReport report;
  // Package eviction: LRU over non-golden entries.
  if (meta_.size() > package_capacity) {
    std::vector<std::pair<Tick, PackageId>> candidates;
    for (const auto& [id, sp] : meta_) {
      if (!sp.golden) candidates.emplace_back(sp.last_access, id);
    }
    std::sort(candidates.begin(), candidates.end());
    size_t excess = meta_.size() - package_capacity;
    for (size_t i = 0; i < candidates.size() && excess > 0; ++i, --excess) {
      const PackageId& id = candidates[i].second;
      meta_.erase(id);
      bytes_.erase(id);
      if (!root_.empty()) {
        std::error_code ec;
        fs::remove(fs::path(root_) / "packages" / (id + ".pkg"), ec);
      }
      report.evicted_packages.push_back(id);
    }
  }
  // Snapshot pruning: oldest first, never pinned ones.
  if (snapshots_.size() > snapshot_capacity) {
    std::vector<std::pair<Tick, SnapshotId>> candidates;
    for (const auto& [id, snap] : snapshots_) {
      if (pinned_snapshots.count(id) == 0) candidates.emplace_back(snap.taken_at, id);
    }
    std::sort(candidates.begin(), candidates.end());
    size_t excess = snapshots_.size() - snapshot_capacity;
    for (size_t i = 0; i < candidates.size() && excess > 0; ++i, --excess) {
      remove_snapshot(candidates[i].second);
      report.evicted_snapshots.push_back(candidates[i].second);
    }
  }
  return report;
}

std::vector<const StoredPackage*> ConfigurationStore::list_packages() const {
  std::vector<const StoredPackage*> out;
  for (const auto& [id, sp] : meta_) {
    (void)id;
    out.push_back(&sp);
  }
  return out;
}

std::vector<const Snapshot*> ConfigurationStore::list_snapshots() const {
  std::vector<const Snapshot*> out;
  for (const auto& [id, s] : snapshots_) {
    (void)id;
    out.push_back(&s);
  }
  return out;
}

void ConfigurationStore::corrupt_package_byte(const PackageId& id, size_t offset) {
  auto it = bytes_.find(id);
  if (it == bytes_.end() || offset >= it->second.size()) return;
  it->second[offset] = static_cast<char>(it->second[offset] ^ 0x01);
  if (!root_.empty()) {
    persist_package(id, it->second);
  }
}

Status ConfigurationStore::persist_package(const PackageId& id, const std::string& bytes) {
  if (root_.empty()) return Status::ok_status();
  fs::path path = fs::path(root_) / "packages" / (id + ".pkg");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return make_error("store", "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  return Status::ok_status();
}

Status ConfigurationStore::persist_snapshot(const Snapshot& snapshot) {
  if (root_.empty()) return Status::ok_status();
  fs::path path = fs::path(root_) / "snapshots" / (snapshot.snapshot_id + ".json");
  return write_document(path.string(), snapshot.to_json());
}

void ConfigurationStore::load_from_disk() {
  fs::path packages = fs::path(root_) / "packages";
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(packages)) {
    if (e.path().extension() == ".pkg") entries.push_back(e.path());
  }
  std::sort(entries.begin(), entries.end());
  for (const auto& path : entries) {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    PackageId id = path.stem().string();
    StoredPackage sp;
    auto parsed = ConfigurationPackage::from_file_bytes(bytes, mac_secret_);
    if (parsed.ok()) {
      sp.package = parsed.value();
    } else {
      // Keep the entry so a later get reports corruption instead of not-found.
      sp.package.package_id = id;
    }
    meta_.emplace(id, std::move(sp));
    bytes_.emplace(id, std::move(bytes));
  }
  fs::path snaps = fs::path(root_) / "snapshots";
  entries.clear();
  for (const auto& e : fs::directory_iterator(snaps)) {
    if (e.path().extension() == ".json") entries.push_back(e.path());
  }
  std::sort(entries.begin(), entries.end());
  for (const auto& path : entries) {
    auto doc = load_document(path.string());
    if (!doc.ok()) continue;
    auto snap = Snapshot::from_json(doc.value());
    if (!snap.ok()) continue;
    snapshots_.emplace(snap.value().snapshot_id, snap.value());
  }
}

} // namespace confab
