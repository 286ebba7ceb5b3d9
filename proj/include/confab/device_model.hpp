#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "confab/canonical.hpp"
#include "confab/result.hpp"
#include "confab/types.hpp"

namespace confab {

// ---------------------------------------------------------------------------
// Device feature metamodel
// ---------------------------------------------------------------------------
// The highest-level template: every device is described by exactly seven
// feature groups (computational, memory, communication, power, sensing,
// acting, os). Organisation models extend this structure with additional
// fields and declare which fields are variation points.

enum class FieldKind { Integer, Number, Text, Flag, NameSet };

const char* field_kind_name(FieldKind k);

struct FieldSpec {
  FieldKind kind;
  // Numeric lower/upper bounds where the base model pins them.
  std::optional<double> min;
  std::optional<double> max;
  bool min_exclusive = false;
  // Fixed choice set for text fields (e.g. power supply kinds).
  std::vector<std::string> choices;
};

class DeviceFeatureMetamodel {
public:
  // The built-in seven-group schema, version 1.0.
  static const DeviceFeatureMetamodel& standard();

  const std::string& version() const { return version_; }
  const std::vector<std::string>& groups() const { return groups_; }

  // Field lookup by canonical path ("capabilities/<group>/<field>").
  const FieldSpec* field(const std::string& path) const;
  const std::map<std::string, FieldSpec>& fields() const { return fields_; }

  Json to_json() const;

private:
  std::string version_;
  std::vector<std::string> groups_;
  std::map<std::string, FieldSpec> fields_;
};

// ---------------------------------------------------------------------------
// Organisational feature model
// ---------------------------------------------------------------------------

// Allowed value set for one variation point: either an explicit enumeration
// or a closed numeric range.
struct Domain {
  enum class Kind { Enumeration, Range };
  Kind kind = Kind::Enumeration;
  std::vector<Json> values; // Enumeration
  double lo = 0.0;          // Range, inclusive
  double hi = 0.0;

  bool contains(const Json& v) const;
  Json to_json() const;
  static Result<Domain> from_json(const Json& j);
};

enum class Access { Configurable, ReadOnly };

struct VariationPoint {
  std::string path;
  Domain domain;
  Access access = Access::Configurable;
  bool invariant = false; // value may never change once set

  Json to_json() const;
};

struct DeviceClass {
  std::string class_id;
  std::map<std::string, Json> fixed; // path -> pinned value
};

struct ExtensionField {
  std::string path; // must extend one of the seven groups
  FieldKind kind = FieldKind::Number;
};

class OrganisationalFeatureModel {
public:
  std::string id;
  std::string dfm_version;
  std::vector<VariationPoint> variation_points;
  std::vector<ExtensionField> extensions;
  std::vector<DeviceClass> device_classes;

  // Checks self-consistency: paths resolve into the (extended) structure,
  // variation point paths unique, class ids unique.
  Status validate(const DeviceFeatureMetamodel& dfm) const;

  const VariationPoint* find_point(const std::string& path) const;
  const DeviceClass* find_class(const std::string& class_id) const;
  bool is_extension(const std::string& path) const;

  // Paths with Access::Configurable, sorted. Invariant-flagged points keep
  // their slot here (they are part of the configurable surface but rejected
  // on write).
  std::vector<std::string> configurable_paths() const;

  Json to_json() const;
  static Result<OrganisationalFeatureModel> from_json(const Json& j);
};

// ---------------------------------------------------------------------------
// Device description and live state
// ---------------------------------------------------------------------------

struct DeviceDescription {
  DeviceId device_id;
  std::string class_id;
  Json capabilities; // the seven-group value tree

  const Json* field(const std::string& path) const;
  Json to_json() const;
  static Result<DeviceDescription> from_json(const Json& j);
};

struct ProvidedService {
  std::string name;
  int level = 0; // ordinal 0..10
};

struct DeviceState {
  DeviceId device_id;
  std::map<std::string, Json> current_values; // configurable point -> value
  std::map<std::string, int> provided_services;
  double charge_pct = 100.0;
  bool online = true;
  Tick last_updated = 0;

  Json to_json() const;
  static Result<DeviceState> from_json(const Json& j);
};

// One validation finding; `path` empty for document-level problems.
struct Violation {
  std::string path;
  std::string what;
};

using ValidationReport = std::vector<Violation>;

std::string report_to_string(const ValidationReport& report);

// Checks a description against the OFM: class known, all seven groups
// present with conforming values, every variation point inside its domain,
// no fields outside the declared structure. Empty report = valid.
// Unknown class ids are a structural error, reported via Result.
Result<ValidationReport> validate_description(const DeviceDescription& desc,
                                              const OrganisationalFeatureModel& ofm,
                                              const DeviceFeatureMetamodel& dfm =
                                                  DeviceFeatureMetamodel::standard());

// Checks a live state against the OFM: current_values keys equal the
// configurable paths exactly, values in domain, charge and service levels in
// range.
Result<ValidationReport> validate_state(const DeviceState& state,
                                        const OrganisationalFeatureModel& ofm);

// Hypothetical overwrite: returns a copy of `s` with `changes` applied.
// last_updated is untouched. Writes to read-only or invariant-flagged paths
// fail.
Result<DeviceState> project_state(const DeviceState& s,
                                  const std::map<std::string, Json>& changes,
                                  const OrganisationalFeatureModel& ofm);

// Initial live state derived from a validated description.
DeviceState initial_state_from_description(const DeviceDescription& desc,
                                           const OrganisationalFeatureModel& ofm,
                                           Tick now);

} // namespace confab
