// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code 0 iff all pass.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "confab/docio.hpp"
#include "confab/factory.hpp"
#include "confab/fleet_sim.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace confab;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (detail.tellp() > 0) detail << "; ";
      detail << what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

PostCondition polling(long v) {
  return fixtures::set_value("capabilities/sensing/polling_rate", Json(v));
}

void run_ticks(World& world, Tick n, Check& check) {
  for (Tick i = 0; i < n; ++i) {
    auto s = world.step();
    if (!s.ok()) {
      check.expect(false, "step failed: " + s.error().to_string());
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// 1. End-to-end pipeline under each strategy
// ---------------------------------------------------------------------------
bool criterion_1(std::string& out) {
  Check check;
  auto start = std::chrono::steady_clock::now();
  for (const std::string strategy : {"pull", "push", "seed"}) {
    fixtures::DeviceOpts d1{.id = "d1"};
    fixtures::DeviceOpts d2{.id = "d2"};
    fixtures::DeviceOpts d3{.id = "d3"};
    d1.poll_phase = 0;
    d2.poll_phase = 1;
    d3.poll_phase = 2;
    auto config = fixtures::test_config();
    config.strategy = strategy;
    auto world = fixtures::make_world(
        fixtures::fleet_json({d1, d2, d3},
                             {fixtures::scenario_json(
                                 "S1", {"d1", "d2", "d3"},
                                 {"capabilities/sensing/polling_rate <= 1000"})}),
        config);
    world->schedule_commission(
        0, fixtures::make_commission("c1", {"S1"},
                                     {polling(42), fixtures::provide_service("temp-sensing", 2)},
                                     0, 100, 5));
    run_ticks(*world, 25, check);
    const CommissionRecord* rec = world->ledger().find("c1");
    check.expect(rec != nullptr && rec->state == CommissionState::Completed,
                 strategy + ": commission not completed within 25 ticks");
    if (rec != nullptr) {
      std::vector<std::string> chain;
      for (const auto& tr : rec->log) chain.push_back(commission_state_name(tr.to));
      check.expect(chain == std::vector<std::string>{"submitted", "scheduled", "building",
                                                     "shipping", "completed"},
                   strategy + ": lifecycle chain wrong");
    }
    for (const auto& id : world->device_ids()) {
      auto st = world->registry().get_state(id, world->now());
      check.expect(st.ok() &&
                       st.value().state.current_values.at(
                           "capabilities/sensing/polling_rate") == Json(42),
                   strategy + ": " + id + " set-value post-condition unmet");
      auto services = st.value().state.provided_services;
      check.expect(services.count("temp-sensing") > 0 && services["temp-sensing"] >= 2,
                   strategy + ": " + id + " provide-service post-condition unmet");
    }
  }
  double elapsed = seconds_since(start);
  check.expect(elapsed < 1.0, "runtime " + std::to_string(elapsed) + "s >= 1s");
  out = check.detail.str();
  return check.ok;
}

// ---------------------------------------------------------------------------
// 2. Safety fuzz: 1,000 commissions over 20 devices in 5 scenarios
// ---------------------------------------------------------------------------
bool criterion_2(std::string& out) {
  Check check;
  auto start = std::chrono::steady_clock::now();

  std::vector<fixtures::DeviceOpts> devices;
  std::vector<Json> scenarios;
  std::vector<std::string> services;
  for (int s = 0; s < 5; ++s) services.push_back("svc-" + std::to_string(s));
  for (int i = 0; i < 20; ++i) {
    fixtures::DeviceOpts d;
    d.id = (i < 10 ? "d0" : "d1") + std::to_string(i % 10);
    d.class_id = i % 3 == 0 ? "esp32" : "rpi3";
    d.supply = i % 4 == 0 ? "battery" : "mains";
    d.report_period = (i % 5 == 0) ? 50 : 10; // some devices go stale
    d.services = {{services[i / 4], 3}};
    devices.push_back(d);
  }
  // The boundary constraint is tighter than the variation-point domain
  // ([1,1000]), so a slice of the random set-values is precisely the kind of
  // commission the gate must keep out.
  for (int s = 0; s < 5; ++s) {
    std::vector<std::string> members;
    for (int k = 0; k < 4; ++k) {
      int i = s * 4 + k;
      members.push_back((i < 10 ? "d0" : "d1") + std::to_string(i % 10));
    }
    scenarios.push_back(fixtures::scenario_json(
        "S" + std::to_string(s), members,
        {"count(service " + services[s] + " level >= 1) >= 1",
         "capabilities/sensing/polling_rate <= 800"}));
  }

  auto config = fixtures::test_config();
  config.seed = 424242;
  auto world =
      fixtures::make_world(fixtures::fleet_json(devices, scenarios),
                           config, fixtures::standard_components(services));
  world->set_paranoid_gate_recheck(true);

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> device_pick(0, 19);
  std::uniform_int_distribution<int> scenario_pick(0, 4);
  std::uniform_int_distribution<int> target_kind(0, 3);
  std::uniform_int_distribution<long> rate(1, 1000);
  std::uniform_int_distribution<int> level(1, 5);
  std::uniform_int_distribution<long> importance(1, 9);
  std::uniform_int_distribution<Tick> arrival(0, 500);
  std::uniform_int_distribution<int> pc_kind(0, 2);

  for (int i = 0; i < 1000; ++i) {
    Tick at = arrival(rng);
    std::string target;
    int scenario_idx;
    if (target_kind(rng) == 0) {
      scenario_idx = scenario_pick(rng);
      target = "S" + std::to_string(scenario_idx);
    } else {
      int d = device_pick(rng);
      scenario_idx = d / 4;
      target = (d < 10 ? "d0" : "d1") + std::to_string(d % 10);
    }
    std::vector<PostCondition> required;
    switch (pc_kind(rng)) {
      case 0:
        required.push_back(polling(rate(rng)));
        break;
      case 1:
        required.push_back(fixtures::provide_service(services[scenario_idx], level(rng)));
        break;
      default:
        required.push_back(polling(rate(rng)));
        required.push_back(fixtures::provide_service(services[scenario_idx], level(rng)));
        break;
    }
    world->schedule_commission(
        at, fixtures::make_commission("fz-" + std::to_string(i), {target}, required, at,
                                      at + 80, importance(rng), "ops"));
  }

  for (Tick t = 0; t < 900; ++t) {
    auto s = world->step();
    if (!s.ok()) {
      check.expect(false, "audit aborted: " + s.error().to_string());
      break;
    }
  }

  check.expect(world->events().of_kind("audit-violation").empty(),
               "audit violations present");
  check.expect(world->events().of_kind("gate-recheck-failed").empty(),
               "gate recheck disagreed after build");

  // At least one commission was denied and later completed.
  std::set<std::string> denied;
  int constraint_denials = 0;
  for (const Event* e : world->events().of_kind("denied")) {
    denied.insert(e->detail["commission"].get<std::string>());
    if (e->detail["reason"].get<std::string>().rfind("constraint", 0) == 0) {
      ++constraint_denials;
    }
  }
  check.expect(constraint_denials > 0, "no constraint denials exercised");
  int denied_then_completed = 0;
  int completed = 0, terminal = 0, open_window = 0;
  for (const CommissionRecord* rec : world->ledger().all()) {
    if (rec->state == CommissionState::Completed) ++completed;
    if (commission_state_terminal(rec->state)) {
      ++terminal;
      if (rec->state == CommissionState::Completed &&
          denied.count(rec->commission.commission_id) > 0) {
        ++denied_then_completed;
      }
    } else {
      // Still live: only acceptable with an open window.
      if (rec->commission.window.latest >= world->now()) ++open_window;
      check.expect(rec->commission.window.latest >= world->now(),
                   "non-terminal commission with closed window: " +
                       rec->commission.commission_id);
    }
  }
  check.expect(denied_then_completed >= 1, "no denied-then-completed commission observed");
  check.expect(completed > 100, "suspiciously few completions: " + std::to_string(completed));

  double elapsed = seconds_since(start);
  check.expect(elapsed < 30.0, "runtime " + std::to_string(elapsed) + "s >= 30s");
  out = "completed=" + std::to_string(completed) +
        " denied-then-completed=" + std::to_string(denied_then_completed) +
        " runtime=" + std::to_string(elapsed) + "s";
  if (!check.ok) out += "; " + check.detail.str();
  return check.ok;
}

// ---------------------------------------------------------------------------
// 3. Scheduler oracle, exhaustive grid
// ---------------------------------------------------------------------------
bool criterion_3(std::string& out) {
  Check check;
  OrganisationalFeatureModel ofm = fixtures::test_ofm();
  DeviceRegistry registry(ofm, 30);
  ScenarioCatalog catalog;

  const char* participants[] = {"P0", "P1", "P2"};
  long instances = 0;

  auto run_production = [&](PolicyKind kind, const oracles::OracleInstance& inst,
                            int p, long scale) {
    Policy pol;
    pol.kind = kind;
    pol.renewal_period = inst.renewal_period;
    pol.renewal_amount = inst.renewal_amount;
    Scheduler sched(pol, registry, catalog);
    for (int i = 0; i < p; ++i) sched.add_participant({participants[i], 6, {1, 1}});
    for (const auto& c : inst.commissions) {
      QueueEntry e;
      e.commission_id = c.id;
      e.source = c.source;
      e.importance = c.importance * scale;
      e.submitted_at = c.submitted_at;
      e.window = {0, 100000};
      e.scheduled_at = 0;
      sched.enqueue("dev", e);
    }
    std::vector<std::string> order;
    for (Tick t = 1; t <= 500 && order.size() < inst.commissions.size(); ++t) {
      sched.renew_currency(t);
      auto pick = sched.select_next("dev", t);
      if (pick) {
        sched.dispatch("dev", *pick);
        order.push_back(*pick);
      }
    }
    return order;
  };

  for (int n = 1; n <= 5 && check.ok; ++n) {
    std::vector<long> imps(n, 1);
    bool more = true;
    while (more && check.ok) {
      for (int p = 1; p <= 3; ++p) {
        oracles::OracleInstance inst;
        inst.renewal_period = 10;
        inst.renewal_amount = 5;
        for (int i = 0; i < p; ++i) {
          inst.balances[participants[i]] = 6;
          inst.gravity[participants[i]] = 1.0;
        }
        for (int i = 0; i < n; ++i) {
          oracles::OracleCommission c;
          c.id = "c" + std::to_string(i);
          c.importance = imps[i];
          c.submitted_at = i % 3; // deterministic variety for tie-breaks
          c.source = participants[i % p];
          inst.commissions.push_back(c);
        }
        ++instances;
        for (const char* policy : {"static", "market", "fifo"}) {
          auto expected = oracles::policy_oracle_order(policy, inst, 500);
          auto got = run_production(policy_kind_from_name(policy).value(), inst, p, 1);
          if (got != expected) {
            check.expect(false, std::string("order mismatch: policy ") + policy + " n=" +
                                    std::to_string(n));
            break;
          }
        }
        // Static order invariant under scaling by 2, 3, 7.
        auto base = run_production(PolicyKind::Static, inst, p, 1);
        for (long scale : {2L, 3L, 7L}) {
          if (run_production(PolicyKind::Static, inst, p, scale) != base) {
            check.expect(false, "static order changed under scale " + std::to_string(scale));
            break;
          }
        }
        if (!check.ok) break;
      }
      // next importance tuple over {1..5}^n
      int pos = n - 1;
      while (pos >= 0 && imps[pos] == 5) {
        imps[pos] = 1;
        --pos;
      }
      if (pos < 0) {
        more = false;
      } else {
        ++imps[pos];
      }
    }
  }
  out = std::to_string(instances) + " instances checked";
  if (!check.ok) out += "; " + check.detail.str();
  return check.ok;
}

// ---------------------------------------------------------------------------
// 4. Market conservation over a 500-tick run
// ---------------------------------------------------------------------------
bool criterion_4(std::string& out) {
  Check check;
  std::vector<fixtures::DeviceOpts> devices;
  for (int i = 0; i < 4; ++i) {
    fixtures::DeviceOpts d;
    d.id = "d" + std::to_string(i);
    devices.push_back(d);
  }
  auto config = fixtures::test_config();
  config.policy = "market";
  config.renewal_period = 20;
  config.renewal_amount = 10;
  config.participants["alpha"] = {30, "1.5"};
  config.participants["beta"] = {20, "1"};
  config.participants["gamma"] = {0, "2"};
  auto world = fixtures::make_world(fixtures::fleet_json(devices), config);

  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<long> bid(1, 12);
  std::uniform_int_distribution<int> dev(0, 3);
  std::uniform_int_distribution<int> who(0, 2);
  const char* names[] = {"alpha", "beta", "gamma"};
  for (int i = 0; i < 120; ++i) {
    Tick at = (i * 4) % 480;
    world->schedule_commission(
        at, fixtures::make_commission("m-" + std::to_string(i),
                                      {"d" + std::to_string(dev(rng))}, {polling(bid(rng) * 10)},
                                      at, at + 60, bid(rng), names[who(rng)]));
  }
  run_ticks(*world, 500, check);

  const Scheduler& sched = world->scheduler();
  Currency lhs = sched.total_balance() + sched.total_spent();
  Currency rhs = sched.initial_total() + sched.total_renewed();
  check.expect(lhs == rhs, "balances+spent=" + std::to_string(lhs) +
                               " != initial+renewals=" + std::to_string(rhs));
  check.expect(sched.total_spent() > 0, "no bids were ever paid");
  out = "balances+spent=" + std::to_string(lhs) + " initial+renewals=" + std::to_string(rhs);
  if (!check.ok) out += "; " + check.detail.str();
  return check.ok;
}

// ---------------------------------------------------------------------------
// 5. Rollback identity
// ---------------------------------------------------------------------------
bool criterion_5(std::string& out) {
  Check check;
  fixtures::DeviceOpts d1{.id = "d1"};
  auto world = fixtures::make_world(fixtures::fleet_json({d1}));
  world->schedule_commission(
      0, fixtures::make_commission("c1", {"d1"}, {polling(10)}, 0, 20, 5, "ops", Tick{30}));
  run_ticks(*world, 24, check);
  const CommissionRecord* rec = world->ledger().find("c1");
  check.expect(rec != nullptr && rec->state == CommissionState::Completed,
               "commission did not complete");
  check.expect(world->device("d1")->live.current_values.at(
                   "capabilities/sensing/polling_rate") == Json(10),
               "package was not applied");

  SnapshotId snap_id = rec != nullptr ? rec->devices.at("d1").pre_snapshot : "";
  auto snapshot = world->store().get_snapshot(snap_id);
  check.expect(snapshot.ok(), "pre-build snapshot missing");

  run_ticks(*world, 26, check); // through revert_at = 30 and the revert pipeline
  rec = world->ledger().find("c1");
  check.expect(rec != nullptr && rec->state == CommissionState::Reverted,
               "original commission not reverted");
  if (snapshot.ok()) {
    std::string now_bytes =
        canonical_compact(Json(world->device("d1")->live.current_values));
    std::string snap_bytes = canonical_compact(Json(snapshot.value().values));
    check.expect(now_bytes == snap_bytes,
                 "configurable values differ from pre-build snapshot");
  }
  out = check.detail.str();
  return check.ok;
}

// ---------------------------------------------------------------------------
// 6. Build determinism across processes
// ---------------------------------------------------------------------------
bool criterion_6(std::string& out) {
  Check check;
  const char* rebuild_bin = std::getenv("CONFAB_REBUILD_BIN");
  if (rebuild_bin == nullptr) {
    out = "CONFAB_REBUILD_BIN not set (run through ctest)";
    return false;
  }
  fs::path dir = fs::temp_directory_path() / "confab-acceptance-6";
  fs::create_directories(dir);

  OrganisationalFeatureModel ofm = fixtures::test_ofm();
  std::vector<TransformationComponent> components;
  for (const auto& cj : fixtures::standard_components({"temp-sensing", "svc-x"})) {
    components.push_back(TransformationComponent::from_json(cj).value());
  }

  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<long> rate(1, 1000);
  std::uniform_int_distribution<int> n_pc(1, 3);
  std::uniform_int_distribution<int> pick_kind(0, 2);
  std::uniform_int_distribution<int> level(1, 9);
  std::uniform_int_distribution<long> importance(0, 10);
  std::uniform_int_distribution<Tick> now_dist(0, 40);

  std::ofstream inputs_file(dir / "inputs.ndjson", std::ios::trunc);
  BuildSettings settings;
  for (int i = 0; i < 100; ++i) {
    fixtures::DeviceOpts opts;
    opts.id = "dev" + std::to_string(i);
    opts.class_id = i % 2 == 0 ? "rpi3" : "esp32";
    opts.polling_rate = static_cast<double>(rate(rng));
    auto desc = DeviceDescription::from_json(fixtures::description_json(opts)).value();

    FactoryInputs in;
    in.device_state = initial_state_from_description(desc, ofm, 0);
    in.platform = opts.class_id;
    in.os_platform = opts.class_id == "rpi3" ? "linux" : "rtos";
    in.os_version = opts.class_id == "rpi3" ? "4.14" : "1.2";

    Commission c;
    c.commission_id = "c" + std::to_string(i);
    c.source = "ops";
    c.importance = importance(rng);
    c.window = {0, 200};
    int n = n_pc(rng);
    for (int k = 0; k < n; ++k) {
      switch (pick_kind(rng)) {
        case 0:
          c.required.push_back(polling(rate(rng)));
          break;
        case 1:
          c.required.push_back(fixtures::set_value("capabilities/sensing/mode",
                                                   Json(k % 2 ? "eco" : "performance")));
          break;
        default:
          c.required.push_back(fixtures::provide_service("svc-x", level(rng) % 10));
          break;
      }
    }
    in.commission = c;
    for (const auto& pc : c.required) {
      ComponentKey key;
      key.kind = pc.kind == PostCondition::Kind::SetValue ? "set-value" : "provide-service";
      key.name = pc.kind == PostCondition::Kind::SetValue ? pc.path : pc.service;
      key.platform = in.platform;
      key.os_platform = in.os_platform;
      bool found = false;
      for (const auto& comp : components) {
        if (comp.key == key) {
          in.components.push_back(comp);
          found = true;
          break;
        }
      }
      if (!found) {
        check.expect(false, "fixture component missing for " + key.to_string());
      }
    }
    inputs_file << canonical_compact(Json{{"inputs", in.to_json()},
                                          {"now", now_dist(rng)},
                                          {"settings", settings.to_json()}})
                << "\n";
  }
  inputs_file.close();

  auto run_rebuild = [&](const std::string& tag) {
    fs::path out_path = dir / ("digests-" + tag + ".txt");
    std::string cmd = std::string(rebuild_bin) + " " + (dir / "inputs.ndjson").string() + " " +
                      out_path.string();
    int status = std::system(cmd.c_str());
    check.expect(WEXITSTATUS(status) == 0, "rebuild process " + tag + " failed");
    std::ifstream in(out_path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };

  std::string first = run_rebuild("a");
  std::string second = run_rebuild("b");
  check.expect(!first.empty(), "no digests produced");
  check.expect(first == second, "digest lists differ between processes");
  size_t lines = static_cast<size_t>(std::count(first.begin(), first.end(), '\n'));
  check.expect(lines == 100, "expected 100 digests, got " + std::to_string(lines));
  fs::remove_all(dir);
  out = std::to_string(lines) + " builds, pairwise identical=" +
        (first == second ? "yes" : "no");
  if (!check.ok) out += "; " + check.detail.str();
  return check.ok;
}

// ---------------------------------------------------------------------------
// 7. Seeding bound and speed (64 targets)
// ---------------------------------------------------------------------------
class AcceptanceFleet : public FleetView {
public:
  bool online(const DeviceId&) const override { return true; }
  bool accepts_transfer(const DeviceId&) const override { return true; }
  double charge_pct(const DeviceId&) const override { return 100.0; }
  std::string power_supply(const DeviceId&) const override { return "mains"; }
  long cores(const DeviceId&) const override { return 4; }
  Tick poll_phase(const DeviceId&, Tick) const override { return 0; }
};

bool criterion_7(std::string& out) {
  Check check;

  // Oracle first: the documented doubling recurrence.
  std::vector<long> holders;
  long seed_rounds = oracles::seed_completion_rounds(64, 1, 1, &holders);
  check.expect(seed_rounds == 7, "oracle says seed rounds = " + std::to_string(seed_rounds));
  check.expect(holders == std::vector<long>{1, 2, 4, 8, 16, 32, 64, 65},
               "oracle holder sequence wrong");
  check.expect(oracles::push_completion_rounds(64, 1) == 64, "oracle push rounds != 64");

  auto make_packages = [&](int n) {
    std::vector<ConfigurationPackage> packages;
    for (int i = 0; i < n; ++i) {
      ConfigurationPackage pkg;
      std::ostringstream id;
      id << "t" << (i < 10 ? "0" : "") << i;
      pkg.package_id = "pkg-" + id.str();
      pkg.commission_id = "c-seed";
      pkg.device_id = id.str();
      Instruction set;
      set.op = Instruction::Op::Set;
      set.path = "capabilities/sensing/polling_rate";
      set.value = 1;
      pkg.artifact.instructions = {set};
      pkg.metadata.latest_shipping_time = 1000;
      pkg.pre_snapshot_ref = "snap";
      pkg.seal("secret");
      packages.push_back(pkg);
    }
    return packages;
  };

  AcceptanceFleet fleet;

  // Seed: completes in exactly 7 transfer rounds, origin bounded by fanout 1.
  {
    RolloutEngine engine;
    Strategy s;
    s.kind = StrategyKind::Seed;
    s.origin_fanout = 1;
    s.seeder_fanout = 1;
    s.min_seed_charge_pct = 0;
    s.min_seed_cores = 1;
    auto rid = engine.plan_rollout(make_packages(64), s, 0, "c-seed", fleet);
    check.expect(rid.ok(), "seed plan failed");
    Tick completed_at = -1;
    for (Tick t = 1; t <= 20 && completed_at < 0; ++t) {
      engine.advance_all(t, fleet);
      bool all = true;
      for (const auto& [id, d] : engine.find(rid.value())->devices) {
        (void)id;
        if (d.status != DeliveryStatus::Delivered) all = false;
      }
      if (all) completed_at = t;
    }
    check.expect(completed_at == 7,
                 "seed completed at tick " + std::to_string(completed_at) + ", want 7");
    std::map<Tick, int> origin_per_tick;
    for (const auto& t : engine.transfer_log()) {
      if (t.sender == "origin") origin_per_tick[t.tick] += 1;
    }
    for (const auto& [tick, count] : origin_per_tick) {
      (void)tick;
      check.expect(count <= 1, "origin sent " + std::to_string(count) + " in one tick");
    }
    check.expect(engine.transfer_log().size() == 64, "transfer count != 64");
  }

  // Push: completes in exactly 64 rounds.
  {
    RolloutEngine engine;
    Strategy s;
    s.kind = StrategyKind::Push;
    s.origin_fanout = 1;
    auto rid = engine.plan_rollout(make_packages(64), s, 0, "c-push", fleet);
    check.expect(rid.ok(), "push plan failed");
    Tick completed_at = -1;
    for (Tick t = 1; t <= 100 && completed_at < 0; ++t) {
      engine.advance_all(t, fleet);
      bool all = true;
      for (const auto& [id, d] : engine.find(rid.value())->devices) {
        (void)id;
        if (d.status != DeliveryStatus::Delivered) all = false;
      }
      if (all) completed_at = t;
    }
    check.expect(completed_at == 64,
                 "push completed at tick " + std::to_string(completed_at) + ", want 64");
  }
  out = check.detail.str();
  return check.ok;
}

// ---------------------------------------------------------------------------
// 8. Shipping metadata enforcement
// ---------------------------------------------------------------------------
bool criterion_8(std::string& out) {
  Check check;

  // Deferred below required charge, delivered after a scheduled recharge.
  {
    fixtures::DeviceOpts d1{.id = "d1", .supply = "battery", .charge = 20.0};
    d1.recharges = Json::array({Json{{"at", 12}, {"amount", 60.0}}});
    auto config = fixtures::test_config();
    config.required_charge_default = 50.0;
    auto world = fixtures::make_world(fixtures::fleet_json({d1}), config);
    world->schedule_commission(0, fixtures::make_commission("c1", {"d1"}, {polling(10)}, 0, 100));
    run_ticks(*world, 20, check);
    check.expect(!world->events().of_kind("deferred").empty(), "no deferred event");
    const CommissionRecord* rec = world->ledger().find("c1");
    check.expect(rec != nullptr && rec->state == CommissionState::Completed,
                 "commission did not complete after recharge");
    Tick delivered_tick = -1;
    for (const Event* e : world->events().of_kind("delivered")) delivered_tick = e->tick;
    check.expect(delivered_tick >= 12, "delivered before the recharge event");
  }

  // A package whose shipping window elapses is never delivered; the
  // commission ends expired.
  {
    fixtures::DeviceOpts d1{.id = "d1"};
    d1.faults = Json::array({Json{{"at", 2}, {"kind", "offline"}, {"duration", 60}}});
    auto config = fixtures::test_config();
    config.shipping_budget = 6;
    auto world = fixtures::make_world(fixtures::fleet_json({d1}), config);
    world->schedule_commission(0, fixtures::make_commission("c2", {"d1"}, {polling(10)}, 0, 30));
    run_ticks(*world, 40, check);
    const CommissionRecord* rec = world->ledger().find("c2");
    check.expect(rec != nullptr && rec->state == CommissionState::Expired,
                 "commission should be expired");
    check.expect(world->events().of_kind("delivered").empty(),
                 "package was delivered after its shipping window");
    check.expect(!world->events().of_kind("ship-expired").empty(), "no ship-expired event");
  }
  out = check.detail.str();
  return check.ok;
}

// ---------------------------------------------------------------------------
// 9. Staleness gates the factory
// ---------------------------------------------------------------------------
bool criterion_9(std::string& out) {
  Check check;

  // Direct factory behavior: gather refuses stale state until a fresh report.
  {
    OrganisationalFeatureModel ofm = fixtures::test_ofm();
    DeviceRegistry registry(ofm, 30);
    ScenarioCatalog catalog;
    CommissionLedger ledger(registry, catalog);
    ArtifactStore artifacts;
    for (const auto& cj : fixtures::standard_components()) {
      artifacts.put_component(TransformationComponent::from_json(cj).value());
    }
    Factory factory(registry, ledger, catalog, artifacts, BuildSettings{});

    fixtures::DeviceOpts o{.id = "d1"};
    auto desc = DeviceDescription::from_json(fixtures::description_json(o)).value();
    registry.register_device(desc, initial_state_from_description(desc, ofm, 0), 0);
    auto id = ledger.submit(fixtures::make_commission("c1", {"d1"}, {polling(10)}, 0, 200), 0);
    check.expect(id.ok(), "submit failed");

    auto stale = factory.gather_inputs("c1", "d1", 40); // last report 0, threshold 30
    check.expect(!stale.ok() && stale.error().category == "gather-failed(stale)",
                 "gather should fail stale at tick 40");

    auto st = registry.get_state("d1", 0).value().state;
    st.last_updated = 45;
    check.expect(registry.update_state("d1", st).ok(), "fresh report rejected");
    auto fresh = factory.gather_inputs("c1", "d1", 46);
    check.expect(fresh.ok(), "gather should succeed after a fresh report");
  }

  // World behavior: with report_period > staleness threshold the pipeline
  // holds the commission until a fresh report arrives, then completes it.
  {
    fixtures::DeviceOpts d1{.id = "d1"};
    d1.report_period = 40;
    auto world = fixtures::make_world(fixtures::fleet_json({d1}));
    world->schedule_commission(32, fixtures::make_commission("c1", {"d1"}, {polling(10)}, 0, 120));
    run_ticks(*world, 50, check);
    bool denied_stale = false;
    for (const Event* e : world->events().of_kind("denied")) {
      if (e->detail["reason"] == "stale-state") denied_stale = true;
    }
    check.expect(denied_stale, "no stale-state denial observed");
    const CommissionRecord* rec = world->ledger().find("c1");
    check.expect(rec != nullptr && rec->state == CommissionState::Completed,
                 "commission did not complete after the fresh report");
    Tick built = -1, report = -1;
    for (const Event* e : world->events().of_kind("built")) built = e->tick;
    for (const Event* e : world->events().of_kind("report")) {
      if (report < 0 && e->tick >= 40) report = e->tick;
    }
    check.expect(built > 0 && report > 0 && built > report,
                 "build did not wait for the fresh report");
  }
  out = check.detail.str();
  return check.ok;
}

// ---------------------------------------------------------------------------
// 10. CLI determinism: identical scenario + seed => byte-identical logs
// ---------------------------------------------------------------------------
bool criterion_10(std::string& out) {
  Check check;
  const char* bin = std::getenv("CONFAB_BIN");
  if (bin == nullptr) {
    out = "CONFAB_BIN not set (run through ctest)";
    return false;
  }
  fs::path dir = fs::temp_directory_path() / "confab-acceptance-10";
  fs::create_directories(dir);

  std::vector<fixtures::DeviceOpts> devices;
  for (int i = 0; i < 5; ++i) {
    fixtures::DeviceOpts d;
    d.id = "d" + std::to_string(i);
    d.class_id = i % 2 == 0 ? "rpi3" : "esp32";
    devices.push_back(d);
  }
  Json scenario{
      {"fleet", fixtures::fleet_json(
                    devices, {fixtures::scenario_json(
                                 "S0", {"d0", "d1", "d2"},
                                 {"capabilities/sensing/polling_rate <= 1000"})})},
      {"components", fixtures::standard_components()},
      {"seed", 20260810},
      {"strategy", Json{{"kind", "seed"}, {"origin_fanout", 1}, {"seeder_fanout", 1},
                        {"min_seed_charge_pct", 0}, {"min_seed_cores", 1}}},
      {"commissions", Json::array()}};
  for (int i = 0; i < 6; ++i) {
    scenario["commissions"].push_back(
        Json{{"at", i * 7},
             {"commission",
              fixtures::make_commission("c" + std::to_string(i),
                                        {i % 2 == 0 ? "S0" : "d" + std::to_string(i % 5)},
                                        {polling(10 + i),
                                         fixtures::provide_service("temp-sensing", 1 + i % 5)},
                                        i * 7, i * 7 + 80, 1 + i)
                  .to_json()}});
  }
  write_document((dir / "scenario.json").string(), scenario);

  auto run_sim = [&](const std::string& tag) {
    fs::path log = dir / ("log-" + tag + ".ndjson");
    std::string cmd = std::string(bin) + " sim run --scenario " +
                      (dir / "scenario.json").string() + " --ticks 120 --out " + log.string() +
                      " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    check.expect(WEXITSTATUS(status) == 0, "sim run " + tag + " failed");
    std::ifstream in(log, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };

  std::string a = run_sim("a");
  std::string b = run_sim("b");
  check.expect(!a.empty(), "empty event log");
  check.expect(a == b, "event logs differ between identical runs");
  check.expect(a.find("\"kind\":\"completed\"") != std::string::npos,
               "no commission completed in the determinism scenario");
  fs::remove_all(dir);
  out = check.detail.str();
  return check.ok;
}

} // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    std::function<bool(std::string&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "end-to-end pipeline under pull/push/seed", criterion_1},
      {2, "safety fuzz with zero constraint violations", criterion_2},
      {3, "scheduler order matches the brute-force oracle", criterion_3},
      {4, "market conservation is exact", criterion_4},
      {5, "rollback identity via snapshots", criterion_5},
      {6, "build determinism across processes", criterion_6},
      {7, "seeding bound and speed (64 targets)", criterion_7},
      {8, "shipping metadata enforcement", criterion_8},
      {9, "staleness gates the factory", criterion_9},
      {10, "byte-identical event logs for identical runs", criterion_10},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    if (!ok) ++failures;
    std::cout << "criterion " << c.number << ": " << (ok ? "PASS" : "FAIL") << " — " << c.name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failing" << std::endl;
    return 1;
  }
  std::cout << "all 10 acceptance criteria pass" << std::endl;
  return 0;
}
