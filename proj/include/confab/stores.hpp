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
// ArtifactStore: transformation components, keyed and version-ranged.
// ---------------------------------------------------------------------------

class ArtifactStore {
public:
  // Rejects duplicate keys and overlapping version ranges for the same key.
  Status put_component(TransformationComponent component);

  // Unique component whose key matches and whose version range contains the
  // device os version. Misses report the nearest key as a hint.
  Result<TransformationComponent> resolve_component(const ComponentKey& key,
                                                    const Version& os_version) const;

  std::vector<TransformationComponent> list_components() const;
  size_t size() const;

private:
  std::map<ComponentKey, std::vector<TransformationComponent>> components_;
};

// ---------------------------------------------------------------------------
// ConfigurationStore: built packages, golden flags, rollback snapshots.
// ---------------------------------------------------------------------------

struct Snapshot {
  SnapshotId snapshot_id;
  DeviceId device_id;
  std::map<std::string, Json> values; // every configurable point at capture
  Tick taken_at = 0;

  Json to_json() const;
  static Result<Snapshot> from_json(const Json& j);
};

struct StoredPackage {
  ConfigurationPackage package;
  bool golden = false;
  Tick stored_at = 0;
  Tick last_access = 0;
};

// Disk mode persists every object under <root>/{packages,snapshots}/ as it is
// written (append-only; eviction unlinks). Memory mode backs tests.
class ConfigurationStore {
public:
  // In-memory store.
  explicit ConfigurationStore(std::string mac_secret);
  // Disk-backed store rooted at `root`; existing objects are loaded eagerly.
  ConfigurationStore(std::string root, std::string mac_secret);

  Result<SnapshotId> put_snapshot(Snapshot snapshot);
  Result<Snapshot> get_snapshot(const SnapshotId& id) const;
  Status remove_snapshot(const SnapshotId& id);

  Status store_package(const ConfigurationPackage& package, Tick now);
  // Returns the package after re-verifying checksum and MAC; corruption is an
  // error, never silently returned data.
  Result<ConfigurationPackage> get_package(const PackageId& id, Tick now);
  Result<std::string> get_package_bytes(const PackageId& id, Tick now);
  Status mark_golden(const PackageId& id);

  // LRU eviction of non-golden packages beyond `package_capacity`, plus
  // removal of unpinned snapshots beyond `snapshot_capacity` (oldest first).
  // Pinned snapshots (referenced by in-flight commissions) are never touched.
  struct GcReport {
    std::vector<PackageId> evicted_packages;
    std::vector<SnapshotId> evicted_snapshots;
  };
  GcReport gc(size_t package_capacity, size_t snapshot_capacity,
              const std::set<SnapshotId>& pinned_snapshots);

  std::vector<const StoredPackage*> list_packages() const;
  std::vector<const Snapshot*> list_snapshots() const;
  const std::string& mac_secret() const { return mac_secret_; }

  // Test hook: flips one byte of the stored package bytes.
  void corrupt_package_byte(const PackageId& id, size_t offset);

private:
  Status persist_package(const PackageId& id, const std::string& bytes);
  Status persist_snapshot(const Snapshot& snapshot);
  void load_from_disk();

  std::string root_; // empty = memory mode
  std::string mac_secret_;
  std::map<SnapshotId, Snapshot> snapshots_;
  std::map<PackageId, StoredPackage> meta_;
  std::map<PackageId, std::string> bytes_; // canonical file bytes
};

} // namespace confab
