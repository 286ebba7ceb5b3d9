#pragma once

// Shared test fleet: one OFM (classes rpi3/esp32) with four configurable
// variation points, plus builders for devices, scenarios, components,
// commissions and worlds.

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "confab/commission.hpp"
#include "confab/config.hpp"
#include "confab/device_model.hpp"
#include "confab/fleet_sim.hpp"
#include "confab/package.hpp"

namespace fixtures {

using confab::Json;
using confab::Tick;

// Fixture failures throw; doctest reports them as test failures and the
// acceptance runner catches them per criterion.
inline void fx_check(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error("fixture: " + what);
}

inline Json ofm_json() {
  return Json{
      {"id", "test-org"},
      {"dfm_version", "1.0"},
      {"extensions",
       Json::array({Json{{"path", "capabilities/sensing/polling_rate"}, {"kind", "number"}},
                    Json{{"path", "capabilities/sensing/mode"}, {"kind", "text"}}})},
      {"variation_points",
       Json::array(
           {Json{{"path", "capabilities/computational/cores"},
                 {"domain", Json{{"values", Json::array({1, 2, 4})}}},
                 {"access", "configurable"}},
            Json{{"path", "capabilities/computational/clock_hz"},
                 {"domain", Json{{"range", Json::array({0.7e9, 1.5e9})}}},
                 {"access", "configurable"}},
            Json{{"path", "capabilities/sensing/polling_rate"},
                 {"domain", Json{{"range", Json::array({1, 1000})}}},
                 {"access", "configurable"}},
            Json{{"path", "capabilities/sensing/mode"},
                 {"domain", Json{{"values", Json::array({"eco", "performance"})}}},
                 {"access", "configurable"}},
            Json{{"path", "capabilities/power/supply"},
                 {"domain", Json{{"values", Json::array({"mains", "battery", "harvesting"})}}},
                 {"access", "read-only"},
                 {"invariant", true}}})},
      {"device_classes",
       Json::array({Json{{"class_id", "rpi3"},
                         {"fixed", Json{{"capabilities/os/platform", "linux"}}}},
                    Json{{"class_id", "esp32"},
                         {"fixed", Json{{"capabilities/os/platform", "rtos"}}}}})}};
}

struct DeviceOpts {
  std::string id = "d1";
  std::string class_id = "rpi3"; // rpi3 -> linux 4.14, esp32 -> rtos 1.2
  std::string supply = "mains";
  double charge = 100.0;
  long cores = 4;
  double clock_hz = 1.2e9;
  double polling_rate = 50;
  std::string mode = "eco";
  std::map<std::string, int> services;
  Tick report_period = 10;
  Tick report_phase = 0;
  std::optional<Tick> poll_phase;
  double idle_drain = 0.0;
  double exec_drain = 0.0;
  double transfer_drain = 0.0;
  Json faults = Json::array();
  Json recharges = Json::array();
  Json duty = Json::object();
  Json watches = Json::array();
};

inline Json description_json(const DeviceOpts& o) {
  std::string os_platform = o.class_id == "rpi3" ? "linux" : "rtos";
  std::string os_version = o.class_id == "rpi3" ? "4.14" : "1.2";
  return Json{
      {"device_id", o.id},
      {"class_id", o.class_id},
      {"capabilities",
       Json{{"computational", Json{{"cores", o.cores}, {"clock_hz", o.clock_hz}}},
            {"memory", Json{{"bytes", 1073741824}}},
            {"communication",
             Json{{"protocols", Json::array({"wifi", "mqtt"})}, {"bandwidth_bps", 1.0e6}}},
            {"power", Json{{"supply", o.supply},
                           {"capacity_mwh", o.supply == "mains" ? 0.0 : 4000.0},
                           {"charge_pct", o.charge}}},
            {"sensing", Json{{"capabilities", Json::array({"temp"})},
                             {"polling_rate", o.polling_rate},
                             {"mode", o.mode}}},
            {"acting", Json{{"capabilities", Json::array()}}},
            {"os", Json{{"platform", os_platform}, {"version", os_version}}}}}};
}

inline Json device_json(const DeviceOpts& o) {
  Json services = Json::object();
  for (const auto& [name, level] : o.services) services[name] = level;
  Json j{{"description", description_json(o)},
         {"state", Json{{"services", services}, {"charge_pct", o.charge}}},
         {"agent", Json{{"report_period", o.report_period}, {"report_phase", o.report_phase}}},
         {"power", Json{{"idle_drain_pct_per_tick", o.idle_drain},
                        {"exec_drain_pct", o.exec_drain},
                        {"transfer_drain_pct", o.transfer_drain}}},
         {"faults", o.faults},
         {"recharges", o.recharges},
         {"watches", o.watches}};
  if (o.poll_phase) j["agent"]["poll_phase"] = *o.poll_phase;
  if (!o.duty.empty()) j["duty"] = o.duty;
  return j;
}

inline Json scenario_json(const std::string& id, const std::vector<std::string>& members,
                          const std::vector<std::string>& constraints) {
  Json m = Json::array();
  for (const auto& d : members) m.push_back(d);
  Json c = Json::array();
  for (const auto& text : constraints) c.push_back(text);
  return Json{{"scenario_id", id}, {"members", m}, {"constraints", c}};
}

inline Json fleet_json(const std::vector<DeviceOpts>& devices,
                       const std::vector<Json>& scenarios = {}) {
  Json devs = Json::array();
  for (const auto& o : devices) devs.push_back(device_json(o));
  Json scens = Json::array();
  for (const auto& s : scenarios) scens.push_back(s);
  return Json{{"ofm", ofm_json()}, {"devices", devs}, {"scenarios", scens}};
}

// One component per (kind, name, platform): set-value components wrap an exec
// plus the set; provide-service components raise the service level.
inline Json component_json(const std::string& kind, const std::string& name,
                           const std::string& platform, const std::string& os_platform,
                           const std::string& versions) {
  Json tpl;
  if (kind == "set-value") {
    tpl = Json::array({Json{{"op", "exec"}, {"command", "cfgctl set {{path}} {{value}}"}},
                       Json{{"op", "set"}, {"path", "{{path}}"}, {"value", "{{value}}"}}});
  } else {
    tpl = Json::array({Json{{"op", "exec"}, {"command", "svc raise {{service}} {{min_level}}"}}});
  }
  return Json{{"kind", kind},           {"name", name}, {"platform", platform},
              {"os", Json{{"platform", os_platform}, {"versions", versions}}},
              {"template", tpl}};
}

// Components covering every configurable point and the given services, for
// both test classes.
inline std::vector<Json> standard_components(
    const std::vector<std::string>& services = {"temp-sensing"}) {
  const std::vector<std::string> paths = {
      "capabilities/computational/cores", "capabilities/computational/clock_hz",
      "capabilities/sensing/polling_rate", "capabilities/sensing/mode"};
  std::vector<Json> out;
  struct Target { const char* platform; const char* os; const char* versions; };
  const Target targets[] = {{"rpi3", "linux", "4.x"}, {"esp32", "rtos", "1.x"}};
  for (const auto& t : targets) {
    for (const auto& p : paths) {
      out.push_back(component_json("set-value", p, t.platform, t.os, t.versions));
    }
    for (const auto& s : services) {
      out.push_back(component_json("provide-service", s, t.platform, t.os, t.versions));
    }
  }
  return out;
}

inline confab::Commission make_commission(
    const std::string& id, const std::vector<std::string>& targets,
    const std::vector<confab::PostCondition>& required, Tick earliest = 0, Tick latest = 100,
    long importance = 5, const std::string& source = "ops",
    std::optional<Tick> revert_at = std::nullopt) {
  confab::Commission c;
  c.commission_id = id;
  c.source = source;
  c.importance = importance;
  c.window = {earliest, latest};
  c.revert_at = revert_at;
  c.targets.insert(targets.begin(), targets.end());
  c.required = required;
  return c;
}

inline confab::PostCondition set_value(const std::string& path, Json value) {
  confab::PostCondition pc;
  pc.kind = confab::PostCondition::Kind::SetValue;
  pc.path = path;
  pc.value = std::move(value);
  return pc;
}

inline confab::PostCondition provide_service(const std::string& service, int min_level) {
  confab::PostCondition pc;
  pc.kind = confab::PostCondition::Kind::ProvideService;
  pc.service = service;
  pc.min_level = min_level;
  return pc;
}

inline confab::RunConfig test_config() {
  confab::RunConfig c;
  c.policy = "static";
  c.strategy = "push";
  c.required_charge_default = 0.0; // charge gating opted into per test
  return c;
}

// Initialized world over the given fleet with standard components loaded.
inline std::unique_ptr<confab::World> make_world(
    const Json& fleet, confab::RunConfig config = test_config(),
    const std::vector<Json>& components = standard_components()) {
  auto bootstrap = confab::fleet_from_json(fleet);
  fx_check(bootstrap.ok(), bootstrap.ok() ? "" : bootstrap.error().to_string());
  auto world = std::make_unique<confab::World>(std::move(config));
  auto ok = world->init(std::move(bootstrap).take());
  fx_check(ok.ok(), ok.ok() ? "" : ok.error().to_string());
  for (const auto& cj : components) {
    auto component = confab::TransformationComponent::from_json(cj);
    fx_check(component.ok(), "component parses");
    fx_check(world->add_component(component.value()).ok(), "component loads");
  }
  return world;
}

// The test OFM as a typed object.
inline confab::OrganisationalFeatureModel test_ofm() {
  auto ofm = confab::OrganisationalFeatureModel::from_json(ofm_json());
  fx_check(ofm.ok(), "test ofm parses");
  return ofm.value();
}

} // namespace fixtures
