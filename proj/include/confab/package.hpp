#pragma once

#include <optional>
#include <string>
#include <vector>

#include "confab/canonical.hpp"
#include "confab/result.hpp"
#include "confab/types.hpp"
#include "confab/version.hpp"

namespace confab {

// ---------------------------------------------------------------------------
// Configuration instructions
// ---------------------------------------------------------------------------
// The built product is a platform-neutral ordered instruction list. Simulated
// device agents interpret it directly; a real shell adapter could translate
// it. Three ops:
//   set    — write a configurable variation point
//   exec   — run an opaque agent command (the agent understands `svc set
//            <name> <level>`; anything else is a no-op acknowledgement)
//   verify — compare post-state against an expectation; a failed verify
//            fails the whole execution

struct Instruction {
  enum class Op { Set, Exec, Verify };
  Op op = Op::Set;

  std::string path;    // Set / Verify(value)
  Json value;          // Set: new value; Verify(value): expected value
  std::string command; // Exec

  std::string service; // Verify(service)
  int min_level = 0;

  Json to_json() const;
  static Result<Instruction> from_json(const Json& j);
};

struct ConfigurationArtifact {
  std::vector<Instruction> instructions;

  Json to_json() const;
  static Result<ConfigurationArtifact> from_json(const Json& j);
};

enum class Criticality { Low, Normal, Critical };

const char* criticality_name(Criticality c);
Result<Criticality> criticality_from_name(const std::string& name);

struct ShippingMetadata {
  double required_charge_pct = 0.0;
  bool interrupt_allowed = true;
  Criticality criticality = Criticality::Normal;
  Tick latest_shipping_time = 0;

  Json to_json() const;
  static Result<ShippingMetadata> from_json(const Json& j);
};

// ---------------------------------------------------------------------------
// ConfigurationPackage
// ---------------------------------------------------------------------------
// Immutable once built. Canonical byte form (see canonical_bytes): an ASCII
// header naming the digest algorithm, followed by length-prefixed sections in
// fixed order. The checksum covers header + sections; the MAC is an
// HMAC-SHA256 with the deployment's shared secret.

struct ConfigurationPackage {
  PackageId package_id;
  CommissionId commission_id; // exactly one source commission
  DeviceId device_id;
  ConfigurationArtifact artifact;
  ShippingMetadata metadata;
  SnapshotId pre_snapshot_ref;
  std::string checksum; // hex sha256 over canonical bytes
  std::string mac;      // hex hmac-sha256 over canonical bytes

  // Header + sections, without checksum/mac. Digest input.
  std::string canonical_bytes() const;
  // Full serialized form including checksum and mac sections.
  std::string file_bytes() const;

  Json to_json() const; // human-readable view for `store show`

  // Parses and verifies checksum + MAC; any mismatch is a corruption error.
  static Result<ConfigurationPackage> from_file_bytes(const std::string& bytes,
                                                      const std::string& mac_secret);

  // Fills checksum and mac from the current content.
  void seal(const std::string& mac_secret);
};

// ---------------------------------------------------------------------------
// TransformationComponent
// ---------------------------------------------------------------------------
// Maps one abstract post-condition kind onto concrete instruction templates
// for a platform/os combination. Placeholders ({{path}}, {{value}},
// {{service}}, {{min_level}}, {{device_id}}) are bound at build time.

struct ComponentKey {
  std::string kind; // "set-value" or "provide-service"
  std::string name; // variation point path or service name
  std::string platform;
  std::string os_platform;

  std::string to_string() const;
  bool operator<(const ComponentKey& o) const;
  bool operator==(const ComponentKey& o) const;
};

struct TransformationComponent {
  ComponentKey key;
  VersionRange os_versions;
  std::vector<Json> instruction_templates;

  Json to_json() const;
  static Result<TransformationComponent> from_json(const Json& j);
};

} // namespace confab
