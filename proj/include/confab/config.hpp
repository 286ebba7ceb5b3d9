#pragma once

#include <map>
#include <string>

#include "confab/canonical.hpp"
#include "confab/result.hpp"
#include "confab/types.hpp"

namespace confab {

// Deployment configuration. All knobs live here; subcommands override
// policy/strategy/seed via flags.
struct RunConfig {
  std::string fleet_path;
  std::string components_dir;
  std::string store_dir; // empty = in-memory stores

  std::string policy = "static"; // static | market | fifo
  Tick renewal_period = 20;
  Currency renewal_amount = 10;
  // participant -> {initial balance, gravity weight as decimal string}
  struct ParticipantConfig {
    Currency initial_balance = 0;
    std::string gravity = "1";
  };
  std::map<std::string, ParticipantConfig> participants;

  std::string strategy = "push"; // pull | push | seed
  long origin_fanout = 1;
  long seeder_fanout = 1;
  Tick poll_period = 5;
  double min_seed_charge_pct = 50.0;
  long min_seed_cores = 2;

  Tick staleness_threshold = 30;
  Tick shipping_budget = 20;
  long retry_budget = 3;
  double required_charge_default = 30.0;
  long importance_max = 10;
  Tick revert_window = 50;
  bool interrupt_allowed_default = true;
  bool revert_partial_rollouts = false; // succeeded members of a partial rollout

  size_t package_capacity = 4096;
  size_t snapshot_capacity = 4096;

  std::string auth_token = "confab-local";
  std::string mac_secret = "confab-shared-secret";
  std::uint64_t seed = 42;

  static Result<RunConfig> from_json(const Json& j);
  Json to_json() const;
};

Result<RunConfig> load_config(const std::string& path);

} // namespace confab
