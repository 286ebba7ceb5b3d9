#include "confab/config.hpp"

namespace confab {

Result<RunConfig> RunConfig::from_json(const Json& j) {
  RunConfig c;
  if (!j.is_object()) return make_error("parse", "config must be an object");
  c.fleet_path = j.value("fleet", "");
  c.components_dir = j.value("components_dir", "");
  c.store_dir = j.value("store_dir", "");
  c.policy = j.value("policy", c.policy);
  if (j.contains("market")) {
    const Json& m = j["market"];
    c.renewal_period = m.value("renewal_period", c.renewal_period);
    c.renewal_amount = m.value("renewal_amount", c.renewal_amount);
    const Json participants_obj = m.value("participants", Json::object());
    for (const auto& [name, pj] : participants_obj.items()) {
      ParticipantConfig pc;
      pc.initial_balance = pj.value("balance", Currency{0});
      if (pj.contains("gravity")) {
        if (pj["gravity"].is_string()) {
          pc.gravity = pj["gravity"].get<std::string>();
        } else if (pj["gravity"].is_number_integer()) {
          pc.gravity = std::to_string(pj["gravity"].get<long>());
        } else {
          return make_error("parse", "gravity must be a decimal string");
        }
      }
      c.participants[name] = pc;
    }
  }
  if (j.contains("strategy")) {
    const Json& s = j["strategy"];
    c.strategy = s.value("kind", c.strategy);
    c.origin_fanout = s.value("origin_fanout", c.origin_fanout);
    c.seeder_fanout = s.value("seeder_fanout", c.seeder_fanout);
    c.poll_period = s.value("poll_period", c.poll_period);
    c.min_seed_charge_pct = s.value("min_seed_charge_pct", c.min_seed_charge_pct);
    c.min_seed_cores = s.value("min_seed_cores", c.min_seed_cores);
  }
  c.staleness_threshold = j.value("staleness_threshold", c.staleness_threshold);
  c.shipping_budget = j.value("shipping_budget", c.shipping_budget);
  c.retry_budget = j.value("retry_budget", c.retry_budget);
  c.required_charge_default = j.value("required_charge_default", c.required_charge_default);
  c.importance_max = j.value("importance_max", c.importance_max);
  c.revert_window = j.value("revert_window", c.revert_window);
  c.interrupt_allowed_default = j.value("interrupt_allowed_default", c.interrupt_allowed_default);
  c.revert_partial_rollouts = j.value("revert_partial_rollouts", c.revert_partial_rollouts);
  c.package_capacity = j.value("package_capacity", c.package_capacity);
  c.snapshot_capacity = j.value("snapshot_capacity", c.snapshot_capacity);
  c.auth_token = j.value("auth_token", c.auth_token);
  c.mac_secret = j.value("mac_secret", c.mac_secret);
  c.seed = j.value("seed", c.seed);

  if (c.origin_fanout < 1 || c.seeder_fanout < 1) {
    return make_error("validation", "fanouts must be >= 1");
  }
  if (c.poll_period < 1 || c.staleness_threshold < 1 || c.shipping_budget < 1 ||
      c.retry_budget < 1 || c.importance_max < 1 || c.revert_window < 1) {
    return make_error("validation", "numeric config parameters must be positive");
  }
  return c;
}

Json RunConfig::to_json() const {
  Json participants_json = Json::object();
  for (const auto& [name, pc] : participants) {
    participants_json[name] = Json{{"balance", pc.initial_balance}, {"gravity", pc.gravity}};
  }
  return Json{
      {"fleet", fleet_path},
      {"components_dir", components_dir},
      {"store_dir", store_dir},
      {"policy", policy},
      {"market", Json{{"renewal_period", renewal_period},
                      {"renewal_amount", renewal_amount},
                      {"participants", participants_json}}},
      {"strategy", Json{{"kind", strategy},
                        {"origin_fanout", origin_fanout},
                        {"seeder_fanout", seeder_fanout},
                        {"poll_period", poll_period},
                        {"min_seed_charge_pct", min_seed_charge_pct},
                        {"min_seed_cores", min_seed_cores}}},
      {"staleness_threshold", staleness_threshold},
      {"shipping_budget", shipping_budget},
      {"retry_budget", retry_budget},
      {"required_charge_default", required_charge_default},
      {"importance_max", importance_max},
      {"revert_window", revert_window},
      {"interrupt_allowed_default", interrupt_allowed_default},
      {"revert_partial_rollouts", revert_partial_rollouts},
      {"package_capacity", package_capacity},
      {"snapshot_capacity", snapshot_capacity},
      {"auth_token", auth_token},
      {"mac_secret", mac_secret},
      {"seed", seed}};
}

Result<RunConfig> load_config(const std::string& path) {
  auto doc = load_document(path);
  if (!doc.ok()) return doc.error();
  return RunConfig::from_json(doc.value());
}

} // namespace confab
