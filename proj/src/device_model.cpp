#include "confab/device_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace confab {

namespace {

constexpr const char* kCapabilities = "capabilities";

bool kind_matches(FieldKind kind, const Json& v) {
  switch (kind) {
    case FieldKind::Integer:
      return v.is_number_integer() || v.is_number_unsigned();
    case FieldKind::Number:
      return v.is_number();
    case FieldKind::Text:
      return v.is_string();
    case FieldKind::Flag:
      return v.is_boolean();
    case FieldKind::NameSet:
      if (!v.is_array()) return false;
      return std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); });
  }
  return false;
}

void collect_leaves(const Json& node, const std::string& prefix,
                    std::vector<std::string>& out) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      collect_leaves(it.value(), prefix + "/" + it.key(), out);
    }
  } else {
    out.push_back(prefix);
  }
}

} // namespace

const char* field_kind_name(FieldKind k) {
  switch (k) {
    case FieldKind::Integer: return "integer";
    case FieldKind::Number: return "number";
    case FieldKind::Text: return "text";
    case FieldKind::Flag: return "flag";
    case FieldKind::NameSet: return "name-set";
  }
  return "unknown";
}

static Result<FieldKind> field_kind_from_name(const std::string& name) {
  if (name == "integer") return FieldKind::Integer;
  if (name == "number") return FieldKind::Number;
  if (name == "text") return FieldKind::Text;
  if (name == "flag") return FieldKind::Flag;
  if (name == "name-set") return FieldKind::NameSet;
  return make_error("parse", "unknown field kind: " + name);
}

// ---------------------------------------------------------------------------
// DeviceFeatureMetamodel
// ---------------------------------------------------------------------------

const DeviceFeatureMetamodel& DeviceFeatureMetamodel::standard() {
  static const DeviceFeatureMetamodel dfm = [] {
    DeviceFeatureMetamodel m;
    m.version_ = "1.0";
    m.groups_ = {"acting", "communication", "computational",
                 "memory", "os", "power", "sensing"};
    auto add = [&m](const char* path, FieldSpec spec) {
      m.fields_.emplace(std::string(kCapabilities) + "/" + path, std::move(spec));
    };
    add("computational/cores", {FieldKind::Integer, 1.0, {}, false, {}});
    add("computational/clock_hz", {FieldKind::Number, 0.0, {}, true, {}});
    add("memory/bytes", {FieldKind::Integer, 0.0, {}, false, {}});
    add("communication/protocols", {FieldKind::NameSet, {}, {}, false, {}});
    add("communication/bandwidth_bps", {FieldKind::Number, 0.0, {}, false, {}});
    add("power/supply", {FieldKind::Text, {}, {}, false, {"mains", "battery", "harvesting"}});
    add("power/capacity_mwh", {FieldKind::Number, 0.0, {}, false, {}});
    add("power/charge_pct", {FieldKind::Number, 0.0, 100.0, false, {}});
    add("sensing/capabilities", {FieldKind::NameSet, {}, {}, false, {}});
    add("acting/capabilities", {FieldKind::NameSet, {}, {}, false, {}});
    add("os/platform", {FieldKind::Text, {}, {}, false, {}});
    add("os/version", {FieldKind::Text, {}, {}, false, {}});
    return m;
  }();
  return dfm;
}

const FieldSpec* DeviceFeatureMetamodel::field(const std::string& path) const {
  auto it = fields_.find(path);
  return it == fields_.end() ? nullptr : &it->second;
}

Json DeviceFeatureMetamodel::to_json() const {
  Json fields = Json::object();
  for (const auto& [path, spec] : fields_) {
    Json f;
    f["kind"] = field_kind_name(spec.kind);
    if (spec.min) f["min"] = *spec.min;
    if (spec.max) f["max"] = *spec.max;
    if (spec.min_exclusive) f["min_exclusive"] = true;
    if (!spec.choices.empty()) f["choices"] = spec.choices;
    fields[path] = std::move(f);
  }
  return Json{{"dfm_version", version_}, {"groups", groups_}, {"fields", fields}};
}

// ---------------------------------------------------------------------------
// Domain
// ---------------------------------------------------------------------------

bool Domain::contains(const Json& v) const {
  if (kind == Kind::Enumeration) {
    return std::any_of(values.begin(), values.end(),
                       [&](const Json& allowed) { return allowed == v; });
  }
  if (!v.is_number()) return false;
  double x = v.get<double>();
  return lo <= x && x <= hi;
}

Json Domain::to_json() const {
  if (kind == Kind::Enumeration) {
    return Json{{"values", values}};
  }
  return Json{{"range", Json::array({lo, hi})}};
}

Result<Domain> Domain::from_json(const Json& j) {
  Domain d;
  if (j.contains("values")) {
    if (!j["values"].is_array() || j["values"].empty()) {
      return make_error("parse", "domain enumeration must be a non-empty array");
    }
    d.kind = Kind::Enumeration;
    for (const auto& v : j["values"]) d.values.push_back(v);
    return d;
  }
  if (j.contains("range")) {
    const auto& r = j["range"];
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
      return make_error("parse", "domain range must be [lo, hi]");
    }
    d.kind = Kind::Range;
    d.lo = r[0].get<double>();
    d.hi = r[1].get<double>();
    if (d.hi < d.lo) return make_error("parse", "inverted domain range");
    return d;
  }
  return make_error("parse", "domain needs either values or range");
}

Json VariationPoint::to_json() const {
  Json j;
  j["path"] = path;
  j["domain"] = domain.to_json();
  j["access"] = access == Access::Configurable ? "configurable" : "read-only";
  if (invariant) j["invariant"] = true;
  return j;
}

// ---------------------------------------------------------------------------
// OrganisationalFeatureModel
// ---------------------------------------------------------------------------

Status OrganisationalFeatureModel::validate(const DeviceFeatureMetamodel& dfm) const {
  if (id.empty()) return make_error("validation", "ofm id empty");
  if (dfm_version != dfm.version()) {
    return make_error("validation", "ofm targets dfm " + dfm_version +
                                        ", loaded dfm is " + dfm.version());
  }
  std::set<std::string> group_prefixes;
  for (const auto& g : dfm.groups()) {
    group_prefixes.insert(std::string(kCapabilities) + "/" + g + "/");
  }
  auto inside_group = [&](const std::string& path) {
    return std::any_of(group_prefixes.begin(), group_prefixes.end(),
                       [&](const std::string& p) { return path.rfind(p, 0) == 0 && path.size() > p.size(); });
  };
  std::set<std::string> ext_paths;
  for (const auto& ext : extensions) {
    if (!inside_group(ext.path)) {
      return make_error("validation", "extension outside the seven groups: " + ext.path);
    }
    if (dfm.field(ext.path) != nullptr) {
      return make_error("validation", "extension collides with base field: " + ext.path);
    }
    if (!ext_paths.insert(ext.path).second) {
      return make_error("validation", "duplicate extension: " + ext.path);
    }
  }
  std::set<std::string> vp_paths;
  for (const auto& vp : variation_points) {
    if (!vp_paths.insert(vp.path).second) {
      return make_error("validation", "duplicate variation point: " + vp.path);
    }
    if (dfm.field(vp.path) == nullptr && ext_paths.count(vp.path) == 0) {
      return make_error("validation",
                        "variation point path not in model structure: " + vp.path);
    }
  }
  std::set<std::string> class_ids;
  for (const auto& dc : device_classes) {
    if (!class_ids.insert(dc.class_id).second) {
      return make_error("validation", "duplicate device class: " + dc.class_id);
    }
    for (const auto& [path, value] : dc.fixed) {
      (void)value;
      if (dfm.field(path) == nullptr && ext_paths.count(path) == 0) {
        return make_error("validation", "fixed value path not in model structure: " + path);
      }
    }
  }
  return Status::ok_status();
}

const VariationPoint* OrganisationalFeatureModel::find_point(const std::string& path) const {
  for (const auto& vp : variation_points) {
    if (vp.path == path) return &vp;
  }
  return nullptr;
}

const DeviceClass* OrganisationalFeatureModel::find_class(const std::string& class_id) const {
  for (const auto& dc : device_classes) {
    if (dc.class_id == class_id) return &dc;
  }
  return nullptr;
}

bool OrganisationalFeatureModel::is_extension(const std::string& path) const {
  return std::any_of(extensions.begin(), extensions.end(),
                     [&](const ExtensionField& e) { return e.path == path; });
}

std::vector<std::string> OrganisationalFeatureModel::configurable_paths() const {
  std::vector<std::string> out;
  for (const auto& vp : variation_points) {
    if (vp.access == Access::Configurable) out.push_back(vp.path);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Json OrganisationalFeatureModel::to_json() const {
  Json j;
  j["id"] = id;
  j["dfm_version"] = dfm_version;
  Json vps = Json::array();
  for (const auto& vp : variation_points) vps.push_back(vp.to_json());
  j["variation_points"] = std::move(vps);
  Json exts = Json::array();
  for (const auto& e : extensions) {
    exts.push_back(Json{{"path", e.path}, {"kind", field_kind_name(e.kind)}});
  }
  j["extensions"] = std::move(exts);
  Json classes = Json::array();
  for (const auto& dc : device_classes) {
    Json fixed = Json::object();
    for (const auto& [p, v] : dc.fixed) fixed[p] = v;
    classes.push_back(Json{{"class_id", dc.class_id}, {"fixed", fixed}});
  }
  j["device_classes"] = std::move(classes);
  return j;
}

Result<OrganisationalFeatureModel> OrganisationalFeatureModel::from_json(const Json& j) {
  OrganisationalFeatureModel ofm;
  if (!j.is_object() || !j.contains("id") || !j.contains("dfm_version")) {
    return make_error("parse", "ofm document needs id and dfm_version");
  }
  ofm.id = j["id"].get<std::string>();
  ofm.dfm_version = j["dfm_version"].get<std::string>();
  for (const auto& vj : j.value("variation_points", Json::array())) {
    VariationPoint vp;
    if (!vj.contains("path") || !vj.contains("domain")) {
      return make_error("parse", "variation point needs path and domain");
    }
    vp.path = vj["path"].get<std::string>();
    auto dom = Domain::from_json(vj["domain"]);
    if (!dom.ok()) return dom.error();
    vp.domain = dom.value();
    std::string access = vj.value("access", "configurable");
    if (access == "configurable") {
      vp.access = Access::Configurable;
    } else if (access == "read-only") {
      vp.access = Access::ReadOnly;
    } else {
      return make_error("parse", "bad access kind: " + access);
    }
    vp.invariant = vj.value("invariant", false);
    ofm.variation_points.push_back(std::move(vp));
  }
  for (const auto& ej : j.value("extensions", Json::array())) {
    ExtensionField ext;
    ext.path = ej.at("path").get<std::string>();
    auto kind = field_kind_from_name(ej.value("kind", "number"));
    if (!kind.ok()) return kind.error();
    ext.kind = kind.value();
    ofm.extensions.push_back(std::move(ext));
  }
  for (const auto& cj : j.value("device_classes", Json::array())) {
    DeviceClass dc;
    dc.class_id = cj.at("class_id").get<std::string>();
    const Json fixed_obj = cj.value("fixed", Json::object());
    for (const auto& [p, v] : fixed_obj.items()) {
      dc.fixed[p] = v;
    }
    ofm.device_classes.push_back(std::move(dc));
  }
  return ofm;
}

// ---------------------------------------------------------------------------
// DeviceDescription / DeviceState
// ---------------------------------------------------------------------------

const Json* DeviceDescription::field(const std::string& path) const {
  // Paths are rooted at "capabilities"; resolve the remainder inside the tree.
  if (path.rfind(std::string(kCapabilities) + "/", 0) != 0) return nullptr;
  std::string rest = path.substr(std::string(kCapabilities).size() + 1);
  return resolve_path(capabilities, rest);
}

Json DeviceDescription::to_json() const {
  return Json{{"device_id", device_id}, {"class_id", class_id}, {kCapabilities, capabilities}};
}

Result<DeviceDescription> DeviceDescription::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("device_id") || !j.contains("class_id") ||
      !j.contains(kCapabilities)) {
    return make_error("parse", "device description needs device_id, class_id, capabilities");
  }
  DeviceDescription d;
  d.device_id = j["device_id"].get<std::string>();
  d.class_id = j["class_id"].get<std::string>();
  d.capabilities = j[kCapabilities];
  return d;
}

Json DeviceState::to_json() const {
  Json values = Json::object();
  for (const auto& [p, v] : current_values) values[p] = v;
  Json services = Json::object();
  for (const auto& [n, l] : provided_services) services[n] = l;
  return Json{{"device_id", device_id},
              {"values", values},
              {"services", services},
              {"charge_pct", charge_pct},
              {"online", online},
              {"last_updated", last_updated}};
}

Result<DeviceState> DeviceState::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("device_id")) {
    return make_error("parse", "device state needs device_id");
  }
  DeviceState s;
  s.device_id = j["device_id"].get<std::string>();
  const Json values_obj = j.value("values", Json::object());
  for (const auto& [p, v] : values_obj.items()) {
    s.current_values[p] = v;
  }
  const Json services_obj = j.value("services", Json::object());
  for (const auto& [n, l] : services_obj.items()) {
    if (!l.is_number_integer()) return make_error("parse", "service level must be integer");
    s.provided_services[n] = l.get<int>();
  }
  s.charge_pct = j.value("charge_pct", 100.0);
  s.online = j.value("online", true);
  s.last_updated = j.value("last_updated", Tick{0});
  return s;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::string report_to_string(const ValidationReport& report) {
  std::ostringstream out;
  for (const auto& v : report) {
    if (!v.path.empty()) out << v.path << ": ";
    out << v.what << "; ";
  }
  return out.str();
}

namespace {

void check_field_value(const std::string& path, const FieldSpec& spec, const Json& v,
                       ValidationReport& report) {
  if (!kind_matches(spec.kind, v)) {
    report.push_back({path, std::string("expected ") + field_kind_name(spec.kind)});
    return;
  }
  if (v.is_number()) {
    double x = v.get<double>();
    if (spec.min) {
      if (spec.min_exclusive ? x <= *spec.min : x < *spec.min) {
        report.push_back({path, "below minimum"});
      }
    }
    if (spec.max && x > *spec.max) {
      report.push_back({path, "above maximum"});
    }
  }
  if (!spec.choices.empty() && v.is_string()) {
    const auto s = v.get<std::string>();
    if (std::find(spec.choices.begin(), spec.choices.end(), s) == spec.choices.end()) {
      report.push_back({path, "not one of the allowed choices"});
    }
  }
}

} // namespace

Result<ValidationReport> validate_description(const DeviceDescription& desc,
                                              const OrganisationalFeatureModel& ofm,
                                              const DeviceFeatureMetamodel& dfm) {
  const DeviceClass* dc = ofm.find_class(desc.class_id);
  if (dc == nullptr) {
    return make_error("unknown-class", "class not declared by ofm: " + desc.class_id);
  }

  ValidationReport report;
  if (desc.device_id.empty()) report.push_back({"device_id", "empty"});
  if (!desc.capabilities.is_object()) {
    report.push_back({std::string(kCapabilities), "must be an object"});
    return report;
  }

  // All seven groups must be present; each is one element of the tuple.
  for (const auto& group : dfm.groups()) {
    if (!desc.capabilities.contains(group)) {
      report.push_back({std::string(kCapabilities) + "/" + group,
                        "missing feature group (7-tuple element)"});
    }
  }

  // Base fields plus declared extensions must be present and conforming.
  std::map<std::string, FieldSpec> declared = dfm.fields();
  for (const auto& ext : ofm.extensions) {
    declared.emplace(ext.path, FieldSpec{ext.kind, {}, {}, false, {}});
  }
  for (const auto& [path, spec] : declared) {
    const Json* v = desc.field(path);
    if (v == nullptr) {
      // Extensions are only required when the class pins them or a variation
      // point references them; base fields are always required.
      bool required = !ofm.is_extension(path) || ofm.find_point(path) != nullptr ||
                      dc->fixed.count(path) > 0;
      if (required) report.push_back({path, "missing field"});
      continue;
    }
    check_field_value(path, spec, *v, report);
  }

  // No undeclared fields anywhere in the tree.
  std::vector<std::string> leaves;
  collect_leaves(desc.capabilities, kCapabilities, leaves);
  for (const auto& leaf : leaves) {
    if (declared.count(leaf) == 0) {
      report.push_back({leaf, "field not declared by model"});
    }
  }

  // Battery devices must declare usable capacity.
  const Json* supply = desc.field("capabilities/power/supply");
  const Json* capacity = desc.field("capabilities/power/capacity_mwh");
  if (supply != nullptr && supply->is_string() && *supply == "battery" &&
      capacity != nullptr && capacity->is_number() && capacity->get<double>() <= 0.0) {
    report.push_back({"capabilities/power/capacity_mwh", "battery device needs capacity > 0"});
  }

  // Every variation point value must lie in its declared domain.
  for (const auto& vp : ofm.variation_points) {
    const Json* v = desc.field(vp.path);
    if (v == nullptr) continue; // already reported as missing
    if (!vp.domain.contains(*v)) {
      report.push_back({vp.path, "value outside variation point domain"});
    }
  }

  // Class-pinned fields must match exactly.
  for (const auto& [path, fixed] : dc->fixed) {
    const Json* v = desc.field(path);
    if (v != nullptr && *v != fixed) {
      report.push_back({path, "does not match class-fixed value"});
    }
  }

  return report;
}

Result<ValidationReport> validate_state(const DeviceState& state,
                                        const OrganisationalFeatureModel& ofm) {
  ValidationReport report;
  auto expected = ofm.configurable_paths();
  std::set<std::string> expected_set(expected.begin(), expected.end());
  for (const auto& path : expected) {
    if (state.current_values.count(path) == 0) {
      report.push_back({path, "configurable point missing from state"});
    }
  }
  for (const auto& [path, value] : state.current_values) {
    if (expected_set.count(path) == 0) {
      report.push_back({path, "state carries a non-configurable path"});
      continue;
    }
    const VariationPoint* vp = ofm.find_point(path);
    if (vp != nullptr && !vp->domain.contains(value)) {
      report.push_back({path, "value outside variation point domain"});
    }
  }
  if (state.charge_pct < 0.0 || state.charge_pct > 100.0) {
    report.push_back({"charge_pct", "outside [0,100]"});
  }
  for (const auto& [name, level] : state.provided_services) {
    if (level < 0 || level > 10) {
      report.push_back({"service/" + name, "level outside [0,10]"});
    }
  }
  return report;
}

Result<DeviceState> project_state(const DeviceState& s,
                                  const std::map<std::string, Json>& changes,
                                  const OrganisationalFeatureModel& ofm) {
  DeviceState out = s;
  for (const auto& [path, value] : changes) {
    const VariationPoint* vp = ofm.find_point(path);
    if (vp == nullptr) {
      return make_error("projection", "not a variation point: " + path);
    }
    if (vp->invariant) {
      return make_error("projection", "invariant point may never change: " + path);
    }
    if (vp->access == Access::ReadOnly) {
      return make_error("projection", "read-only point: " + path);
    }
    out.current_values[path] = value;
  }
  return out;
}

DeviceState initial_state_from_description(const DeviceDescription& desc,
                                           const OrganisationalFeatureModel& ofm,
                                           Tick now) {
  DeviceState s;
  s.device_id = desc.device_id;
  for (const auto& path : ofm.configurable_paths()) {
    const Json* v = desc.field(path);
    if (v != nullptr) s.current_values[path] = *v;
  }
  const Json* charge = desc.field("capabilities/power/charge_pct");
  if (charge != nullptr && charge->is_number()) s.charge_pct = charge->get<double>();
  s.online = true;
  s.last_updated = now;
  return s;
}

} // namespace confab
