#include "confab/package.hpp"

#include <cstdint>
#include <sstream>
#include <tuple>

#include "confab/digest.hpp"

namespace confab {

namespace {

constexpr const char* kHeader = "CONFABPKG1 sha256\n";

void append_section(std::string& out, const std::string& data) {
  uint32_t n = static_cast<uint32_t>(data.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += data;
}

bool read_section(const std::string& in, size_t& pos, std::string& out) {
  if (pos + 4 > in.size()) return false;
  uint32_t n = (static_cast<uint32_t>(static_cast<unsigned char>(in[pos])) << 24) |
               (static_cast<uint32_t>(static_cast<unsigned char>(in[pos + 1])) << 16) |
               (static_cast<uint32_t>(static_cast<unsigned char>(in[pos + 2])) << 8) |
               static_cast<uint32_t>(static_cast<unsigned char>(in[pos + 3]));
  pos += 4;
  if (pos + n > in.size()) return false;
  out = in.substr(pos, n);
  pos += n;
  return true;
}

} // namespace

Json Instruction::to_json() const {
  switch (op) {
    case Op::Set:
      return Json{{"op", "set"}, {"path", path}, {"value", value}};
    case Op::Exec:
      return Json{{"op", "exec"}, {"command", command}};
    case Op::Verify:
      if (!service.empty()) {
        return Json{{"op", "verify"}, {"service", service}, {"min_level", min_level}};
      }
      return Json{{"op", "verify"}, {"path", path}, {"expect", value}};
  }
  return Json::object();
}

Result<Instruction> Instruction::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("op")) return make_error("parse", "instruction needs op");
  Instruction ins;
  std::string op = j["op"].get<std::string>();
  if (op == "set") {
    ins.op = Op::Set;
    if (!j.contains("path") || !j.contains("value")) {
      return make_error("parse", "set instruction needs path and value");
    }
    ins.path = j["path"].get<std::string>();
    ins.value = j["value"];
    return ins;
  }
  if (op == "exec") {
    ins.op = Op::Exec;
    if (!j.contains("command")) return make_error("parse", "exec instruction needs command");
    ins.command = j["command"].get<std::string>();
    return ins;
  }
  if (op == "verify") {
    ins.op = Op::Verify;
    if (j.contains("service")) {
      ins.service = j["service"].get<std::string>();
      ins.min_level = j.value("min_level", 1);
      return ins;
    }
    if (!j.contains("path") || !j.contains("expect")) {
      return make_error("parse", "verify instruction needs path+expect or service");
    }
    ins.path = j["path"].get<std::string>();
    ins.value = j["expect"];
    return ins;
  }
  return make_error("parse", "unknown instruction op: " + op);
}

Json ConfigurationArtifact::to_json() const {
  Json list = Json::array();
  for (const auto& ins : instructions) list.push_back(ins.to_json());
  return Json{{"instructions", list}};
}

Result<ConfigurationArtifact> ConfigurationArtifact::from_json(const Json& j) {
  ConfigurationArtifact a;
  for (const auto& ij : j.value("instructions", Json::array())) {
    auto ins = Instruction::from_json(ij);
    if (!ins.ok()) return ins.error();
    a.instructions.push_back(ins.value());
  }
  return a;
}

const char* criticality_name(Criticality c) {
  switch (c) {
    case Criticality::Low: return "low";
    case Criticality::Normal: return "normal";
    case Criticality::Critical: return "critical";
  }
  return "unknown";
}

Result<Criticality> criticality_from_name(const std::string& name) {
  if (name == "low") return Criticality::Low;
  if (name == "normal") return Criticality::Normal;
  if (name == "critical") return Criticality::Critical;
  return make_error("parse", "unknown criticality: " + name);
}

Json ShippingMetadata::to_json() const {
  return Json{{"required_charge_pct", required_charge_pct},
              {"interrupt_allowed", interrupt_allowed},
              {"criticality", criticality_name(criticality)},
              {"latest_shipping_time", latest_shipping_time}};
}

Result<ShippingMetadata> ShippingMetadata::from_json(const Json& j) {
  ShippingMetadata m;
  m.required_charge_pct = j.value("required_charge_pct", 0.0);
  if (m.required_charge_pct < 0.0 || m.required_charge_pct > 100.0) {
    return make_error("parse", "required_charge_pct outside [0,100]");
  }
  m.interrupt_allowed = j.value("interrupt_allowed", true);
  auto crit = criticality_from_name(j.value("criticality", "normal"));
  if (!crit.ok()) return crit.error();
  m.criticality = crit.value();
  m.latest_shipping_time = j.value("latest_shipping_time", Tick{0});
  return m;
}

std::string ConfigurationPackage::canonical_bytes() const {
  std::string out = kHeader;
  append_section(out, package_id);
  append_section(out, commission_id);
  append_section(out, device_id);
  append_section(out, canonical_compact(artifact.to_json()));
  append_section(out, canonical_compact(metadata.to_json()));
  append_section(out, pre_snapshot_ref);
  return out;
}

std::string ConfigurationPackage::file_bytes() const {
  std::string out = canonical_bytes();
  append_section(out, checksum);
  append_section(out, mac);
  return out;
}

void ConfigurationPackage::seal(const std::string& mac_secret) {
  std::string bytes = canonical_bytes();
  checksum = sha256_hex(bytes);
  mac = hmac_sha256_hex(mac_secret, bytes);
}

Json ConfigurationPackage::to_json() const {
  return Json{{"package_id", package_id},
              {"commission_id", commission_id},
              {"device_id", device_id},
              {"artifact", artifact.to_json()},
              {"metadata", metadata.to_json()},
              {"pre_snapshot_ref", pre_snapshot_ref},
              {"digest_algorithm", "sha256"},
              {"checksum", checksum},
              {"mac", mac}};
}

Result<ConfigurationPackage> ConfigurationPackage::from_file_bytes(const std::string& bytes,
                                                                   const std::string& mac_secret) {
  const std::string header = kHeader;
  if (bytes.compare(0, header.size(), header) != 0) {
    return make_error("corruption", "bad package header");
  }
  size_t pos = header.size();
  ConfigurationPackage pkg;
  std::string artifact_json, metadata_json;
  if (!read_section(bytes, pos, pkg.package_id) ||
      !read_section(bytes, pos, pkg.commission_id) ||
      !read_section(bytes, pos, pkg.device_id) ||
      !read_section(bytes, pos, artifact_json) ||
      !read_section(bytes, pos, metadata_json) ||
      !read_section(bytes, pos, pkg.pre_snapshot_ref)) {
    return make_error("corruption", "truncated package sections");
  }
  std::string stored_checksum, stored_mac;
  if (!read_section(bytes, pos, stored_checksum) || !read_section(bytes, pos, stored_mac)) {
    return make_error("corruption", "missing checksum/mac sections");
  }
  if (pos != bytes.size()) {
    return make_error("corruption", "trailing bytes after package");
  }

  auto aj = parse_document(artifact_json, "package artifact");
  if (!aj.ok()) return make_error("corruption", "artifact section unreadable");
  auto artifact = ConfigurationArtifact::from_json(aj.value());
  if (!artifact.ok()) return make_error("corruption", "artifact section malformed");
  pkg.artifact = artifact.value();

  auto mj = parse_document(metadata_json, "package metadata");
  if (!mj.ok()) return make_error("corruption", "metadata section unreadable");
  auto metadata = ShippingMetadata::from_json(mj.value());
  if (!metadata.ok()) return make_error("corruption", "metadata section malformed");
  pkg.metadata = metadata.value();

  std::string canon = pkg.canonical_bytes();
  if (sha256_hex(canon) != stored_checksum) {
    return make_error("corruption", "checksum mismatch for package " + pkg.package_id);
  }
  if (hmac_sha256_hex(mac_secret, canon) != stored_mac) {
    return make_error("integrity", "mac mismatch for package " + pkg.package_id);
  }
  pkg.checksum = stored_checksum;
  pkg.mac = stored_mac;
  return pkg;
}

std::string ComponentKey::to_string() const {
  return "(" + kind + " " + name + ", " + platform + ", " + os_platform + ")";
}

bool ComponentKey::operator<(const ComponentKey& o) const {
  return std::tie(kind, name, platform, os_platform) <
         std::tie(o.kind, o.name, o.platform, o.os_platform);
}

bool ComponentKey::operator==(const ComponentKey& o) const {
  return std::tie(kind, name, platform, os_platform) ==
         std::tie(o.kind, o.name, o.platform, o.os_platform);
}

Json TransformationComponent::to_json() const {
  return Json{{"kind", key.kind},
              {"name", key.name},
              {"platform", key.platform},
              {"os", Json{{"platform", key.os_platform}, {"versions", os_versions.text()}}},
              {"template", instruction_templates}};
}

Result<TransformationComponent> TransformationComponent::from_json(const Json& j) {
  if (!j.is_object()) return make_error("parse", "component must be an object");
  TransformationComponent tc;
  tc.key.kind = j.value("kind", "");
  if (tc.key.kind != "set-value" && tc.key.kind != "provide-service") {
    return make_error("parse", "component kind must be set-value or provide-service");
  }
  tc.key.name = j.value("name", "");
  if (tc.key.name.empty()) return make_error("parse", "component needs name");
  tc.key.platform = j.value("platform", "");
  if (tc.key.platform.empty()) return make_error("parse", "component needs platform");
  if (!j.contains("os") || !j["os"].is_object()) {
    return make_error("parse", "component needs os {platform, versions}");
  }
  tc.key.os_platform = j["os"].value("platform", "");
  auto range = VersionRange::parse(j["os"].value("versions", "*"));
  if (!range.ok()) return range.error();
  tc.os_versions = range.value();
  if (!j.contains("template") || !j["template"].is_array() || j["template"].empty()) {
    return make_error("parse", "component needs a non-empty template");
  }
  for (const auto& t : j["template"]) tc.instruction_templates.push_back(t);
  return tc;
}

} // namespace confab
