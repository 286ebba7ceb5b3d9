#include <doctest.h>

#include "confab/fleet_sim.hpp"
#include "fixtures.hpp"

using namespace confab;

namespace {

PostCondition polling(long v) {
  return fixtures::set_value("capabilities/sensing/polling_rate", Json(v));
}

void run_ticks(World& world, Tick n) {
  for (Tick i = 0; i < n; ++i) {
    auto s = world.step();
    REQUIRE_MESSAGE(s.ok(), s.error().to_string());
  }
}

Tick first_event_tick(const World& world, const std::string& kind,
                      const std::string& commission = "") {
  for (const Event* e : world.events().of_kind(kind)) {
    if (commission.empty() || (e->detail.contains("commission") &&
                               e->detail["commission"] == commission)) {
      return e->tick;
    }
  }
  return -1;
}

} // namespace

TEST_CASE("a tick on an empty world appends no events") {
  auto world = fixtures::make_world(fixtures::fleet_json({}), fixtures::test_config(), {});
  size_t baseline = world->events().events().size();
  run_ticks(*world, 3);
  CHECK(world->events().events().size() == baseline);
}

TEST_CASE("single commission flows through the phases in causal order") {
  fixtures::DeviceOpts d1{.id = "d1"};
  auto world = fixtures::make_world(fixtures::fleet_json({d1}));
  world->set_paranoid_gate_recheck(true);
  world->schedule_commission(0, fixtures::make_commission("c1", {"d1"}, {polling(10)}));
  run_ticks(*world, 10);

  const CommissionRecord* rec = world->ledger().find("c1");
  REQUIRE(rec != nullptr);
  CHECK(rec->state == CommissionState::Completed);

  // Transition log follows the lifecycle with strictly increasing ticks.
  std::vector<std::string> chain;
  for (const auto& tr : rec->log) chain.push_back(commission_state_name(tr.to));
  CHECK(chain == std::vector<std::string>{"submitted", "scheduled", "building", "shipping",
                                          "completed"});
  for (size_t i = 1; i < rec->log.size(); ++i) {
    CHECK(rec->log[i].tick > rec->log[i - 1].tick);
  }

  // Event causal order across phases 3, 4, 5, 6.
  Tick submitted = first_event_tick(*world, "submitted", "c1");
  Tick scheduled = first_event_tick(*world, "scheduled", "c1");
  Tick built = first_event_tick(*world, "built", "c1");
  Tick delivered = first_event_tick(*world, "delivered");
  Tick executed = first_event_tick(*world, "executed");
  REQUIRE(submitted >= 0);
  REQUIRE(scheduled > submitted);
  REQUIRE(built > scheduled);
  REQUIRE(delivered > built);
  REQUIRE(executed > delivered);

  // No paranoid recheck disagreement.
  CHECK(world->events().of_kind("gate-recheck-failed").empty());

  // Registry reflects the post-condition after the post-execution report.
  auto st = world->registry().get_state("d1", world->now()).value().state;
  CHECK(st.current_values.at("capabilities/sensing/polling_rate") == Json(10));
}

TEST_CASE("identical fleets and schedules give byte-identical event logs") {
  auto build_and_run = [] {
    fixtures::DeviceOpts d1{.id = "d1"};
    fixtures::DeviceOpts d2{.id = "d2"};
    auto world = fixtures::make_world(
        fixtures::fleet_json({d1, d2}, {fixtures::scenario_json(
                                "S1", {"d1", "d2"},
                                {"capabilities/sensing/polling_rate <= 1000"})}));
    world->schedule_commission(0, fixtures::make_commission("c1", {"S1"}, {polling(10)}));
    world->schedule_commission(3, fixtures::make_commission(
                                      "c2", {"d2"},
                                      {fixtures::provide_service("temp-sensing", 2)}));
    run_ticks(*world, 30);
    return world->events().serialize();
  };
  CHECK(build_and_run() == build_and_run());
}

TEST_CASE("tampered packages fail with integrity and leave state untouched") {
  fixtures::DeviceOpts d1{.id = "d1"};
  auto config = fixtures::test_config();
  config.retry_budget = 2;
  auto world = fixtures::make_world(fixtures::fleet_json({d1}), config);
  world->schedule_commission(0, fixtures::make_commission("c1", {"d1"}, {polling(10)}));

  // Run until the package is built, then flip one byte in the store.
  run_ticks(*world, 3);
  auto packages = world->store().list_packages();
  REQUIRE(packages.size() == 1);
  PackageId pid = packages[0]->package.package_id;
  world->store().corrupt_package_byte(pid, packages[0]->package.file_bytes().size() - 3);

  run_ticks(*world, 10);
  const CommissionRecord* rec = world->ledger().find("c1");
  CHECK(rec->state == CommissionState::Rejected);
  auto failures = world->events().of_kind("exec-failed");
  REQUIRE_FALSE(failures.empty());
  CHECK(failures[0]->detail["receipt"]["detail"].get<std::string>().find("integrity") !=
        std::string::npos);
  // Ground truth unchanged.
  CHECK(world->device("d1")->live.current_values.at("capabilities/sensing/polling_rate") ==
        Json(50));
}

TEST_CASE("execution drains battery devices and clamps at zero") {
  fixtures::DeviceOpts d1{.id = "d1", .supply = "battery", .charge = 10.0};
  d1.exec_drain = 3.0;
  auto world = fixtures::make_world(fixtures::fleet_json({d1}));
  world->schedule_commission(0, fixtures::make_commission("c1", {"d1"}, {polling(10)}));
  run_ticks(*world, 8);
  CHECK(world->ledger().find("c1")->state == CommissionState::Completed);
  CHECK(world->device("d1")->live.charge_pct == doctest::Approx(7.0));
}

TEST_CASE("reports land on the period and staleness accrues while offline") {
  fixtures::DeviceOpts d1{.id = "d1"};
  d1.report_period = 10;
  d1.faults = Json::array({Json{{"at", 10}, {"kind", "offline"}, {"duration", 20}}});
  auto config = fixtures::test_config();
  config.staleness_threshold = 15;
  auto world = fixtures::make_world(fixtures::fleet_json({d1}), config);
  run_ticks(*world, 29);

  std::vector<Tick> report_ticks;
  for (const Event* e : world->events().of_kind("report")) report_ticks.push_back(e->tick);
  // Period 10 phase 0, but the device is offline from tick 10 to 29.
  CHECK(report_ticks == std::vector<Tick>{0});

  auto got = world->registry().get_state("d1", 28);
  REQUIRE(got.ok());
  CHECK_FALSE(got.value().fresh); // last report 0, gap 28 > 15
}

TEST_CASE("battery charge only rises through explicit recharge events") {
  fixtures::DeviceOpts d1{.id = "d1", .supply = "battery", .charge = 50.0};
  d1.idle_drain = 1.0;
  d1.recharges = Json::array({Json{{"at", 10}, {"amount", 100.0}}});
  fixtures::DeviceOpts d2{.id = "d2", .supply = "mains"};
  d2.idle_drain = 5.0; // ignored for mains
  auto world = fixtures::make_world(fixtures::fleet_json({d1, d2}));

  double last = 50.0;
  for (Tick t = 0; t < 30; ++t) {
    REQUIRE(world->step().ok());
    double charge = world->device("d1")->live.charge_pct;
    CHECK(charge >= 0.0);
    CHECK(charge <= 100.0);
    if (t == 10) {
      CHECK(charge > last); // recharge event
    } else {
      CHECK(charge <= last);
    }
    last = charge;
    CHECK(world->device("d2")->live.charge_pct == 100.0);
  }
}

TEST_CASE("final states agree across pull, push and seed") {
  auto final_values = [](const std::string& strategy) {
    fixtures::DeviceOpts d1{.id = "d1"};
    fixtures::DeviceOpts d2{.id = "d2"};
    fixtures::DeviceOpts d3{.id = "d3"};
    d1.poll_phase = 0;
    d2.poll_phase = 1;
    d3.poll_phase = 2;
    auto config = fixtures::test_config();
    config.strategy = strategy;
    auto world = fixtures::make_world(fixtures::fleet_json({d1, d2, d3}), config);
    world->schedule_commission(
        0, fixtures::make_commission("c1", {"d1", "d2", "d3"},
                                     {polling(7), fixtures::provide_service("temp-sensing", 3)}));
    for (Tick t = 0; t < 40; ++t) REQUIRE(world->step().ok());
    REQUIRE(world->ledger().find("c1")->state == CommissionState::Completed);
    Json out = Json::object();
    for (const auto& id : world->device_ids()) {
      out[id] = world->registry().get_state(id, world->now()).value().state.to_json();
      out[id].erase("last_updated"); // timing differs across strategies
    }
    return out;
  };
  auto push = final_values("push");
  auto pull = final_values("pull");
  auto seed = final_values("seed");
  CHECK(push == pull);
  CHECK(push == seed);
}

TEST_CASE("rollback identity: revert returns configurable values to the snapshot") {
  fixtures::DeviceOpts d1{.id = "d1"};
  auto world = fixtures::make_world(fixtures::fleet_json({d1}));
  auto before = world->device("d1")->live.current_values;

  world->schedule_commission(
      0, fixtures::make_commission("c1", {"d1"}, {polling(10)}, 0, 20, 5, "ops", Tick{30}));
  run_ticks(*world, 25);
  REQUIRE(world->ledger().find("c1")->state == CommissionState::Completed);
  CHECK(world->device("d1")->live.current_values.at("capabilities/sensing/polling_rate") ==
        Json(10));

  run_ticks(*world, 25);
  const CommissionRecord* rec = world->ledger().find("c1");
  CHECK(rec->state == CommissionState::Reverted);
  CHECK(canonical_compact(Json(world->device("d1")->live.current_values)) ==
        canonical_compact(Json(before)));
}

TEST_CASE("deleted snapshots make the revert impossible but keep completion") {
  fixtures::DeviceOpts d1{.id = "d1"};
  auto world = fixtures::make_world(fixtures::fleet_json({d1}));
  world->schedule_commission(
      0, fixtures::make_commission("c1", {"d1"}, {polling(10)}, 0, 20, 5, "ops", Tick{30}));
  run_ticks(*world, 25);
  REQUIRE(world->ledger().find("c1")->state == CommissionState::Completed);

  // Evict the snapshot behind the commission's back (store-eviction scenario).
  const CommissionRecord* rec = world->ledger().find("c1");
  SnapshotId snap = rec->devices.at("d1").pre_snapshot;
  REQUIRE(world->store().remove_snapshot(snap).ok());

  run_ticks(*world, 25);
  rec = world->ledger().find("c1");
  CHECK(rec->state == CommissionState::Completed);
  REQUIRE_FALSE(rec->notes.empty());
  CHECK(rec->notes[0].find("revert-impossible") != std::string::npos);
  CHECK_FALSE(world->events().of_kind("revert-impossible").empty());
}

TEST_CASE("duty-cycled devices defer non-interrupting executions") {
  fixtures::DeviceOpts d1{.id = "d1"};
  d1.duty = Json{{"period", 4}, {"busy_len", 2}};
  auto config = fixtures::test_config();
  config.interrupt_allowed_default = false;
  auto world = fixtures::make_world(fixtures::fleet_json({d1}), config);
  world->schedule_commission(0, fixtures::make_commission("c1", {"d1"}, {polling(10)}));
  run_ticks(*world, 12);
  CHECK(world->ledger().find("c1")->state == CommissionState::Completed);
  // Delivered at tick 3, execution due tick 4 (busy: 4 % 4 = 0 < 2), so it
  // must have been deferred at least once.
  CHECK_FALSE(world->events().of_kind("exec-deferred").empty());
}

TEST_CASE("watch rules submit internal commissions through the same interface") {
  fixtures::DeviceOpts d1{.id = "d1", .supply = "battery", .charge = 60.0};
  d1.idle_drain = 2.0;
  d1.watches = Json::array(
      {Json{{"path", "charge_pct"},
            {"below", 50.0},
            {"commission",
             Json{{"importance", 9},
                  {"window", Json{{"earliest", 0}, {"latest", 200}}},
                  {"required", Json::array({Json{{"kind", "set-value"},
                                                 {"path", "capabilities/sensing/polling_rate"},
                                                 {"value", 500}}})}}}}});
  auto world = fixtures::make_world(fixtures::fleet_json({d1}));
  run_ticks(*world, 30);

  auto internal = world->events().of_kind("internal-commission");
  REQUIRE(internal.size() == 1);
  CHECK(internal[0]->detail["device"] == "d1");

  // The internally submitted commission ran to completion.
  bool found = false;
  for (const CommissionRecord* rec : world->ledger().all()) {
    if (rec->commission.source == "d1") {
      found = true;
      CHECK(rec->state == CommissionState::Completed);
    }
  }
  CHECK(found);
  CHECK(world->device("d1")->live.current_values.at("capabilities/sensing/polling_rate") ==
        Json(500));
}

TEST_CASE("stale-state denials are retried and admitted after a fresh report") {
  fixtures::DeviceOpts d1{.id = "d1"};
  d1.report_period = 40; // longer than the staleness threshold of 30
  auto world = fixtures::make_world(fixtures::fleet_json({d1}));
  // Submit while the registry copy is already stale (last report at 0).
  world->schedule_commission(33, fixtures::make_commission("c1", {"d1"}, {polling(10)}, 0, 100));
  run_ticks(*world, 50);

  const CommissionRecord* rec = world->ledger().find("c1");
  CHECK(rec->state == CommissionState::Completed);
  bool denied_stale = false;
  for (const Event* e : world->events().of_kind("denied")) {
    if (e->detail["commission"] == "c1" && e->detail["reason"] == "stale-state") {
      denied_stale = true;
    }
  }
  CHECK(denied_stale);
}

TEST_CASE("liveness: safety-allowed commissions finish within the latency bound") {
  fixtures::DeviceOpts d1{.id = "d1"};
  fixtures::DeviceOpts d2{.id = "d2", .class_id = "esp32"};
  auto world = fixtures::make_world(
      fixtures::fleet_json({d1, d2}, {fixtures::scenario_json(
                              "S1", {"d1", "d2"},
                              {"capabilities/sensing/polling_rate <= 1000"})}));
  world->schedule_commission(0, fixtures::make_commission("c1", {"S1"}, {polling(9)}));
  world->schedule_commission(2, fixtures::make_commission("c2", {"d1"}, {polling(11)}, 0, 60, 8));

  // build latency + rollout bound + report period at this scale
  run_ticks(*world, 30);
  CHECK(world->ledger().find("c1")->state == CommissionState::Completed);
  CHECK(world->ledger().find("c2")->state == CommissionState::Completed);
}

TEST_CASE("partial rollouts can revert succeeded members behind the flag") {
  fixtures::DeviceOpts d1{.id = "d1"};
  fixtures::DeviceOpts d2{.id = "d2"};
  d2.faults = Json::array({Json{{"at", 0}, {"kind", "exec-fail"}, {"duration", 100}}});
  auto config = fixtures::test_config();
  config.revert_partial_rollouts = true;
  config.retry_budget = 2;
  auto world = fixtures::make_world(fixtures::fleet_json({d1, d2}), config);
  world->schedule_commission(0,
                             fixtures::make_commission("c1", {"d1", "d2"}, {polling(10)}, 0, 30));
  run_ticks(*world, 45);

  const CommissionRecord* rec = world->ledger().find("c1");
  REQUIRE(rec != nullptr);
  CHECK(rec->state == CommissionState::Rejected);
  CHECK(rec->log.back().note.find("partial") != std::string::npos);
  CHECK_FALSE(world->events().of_kind("partial-revert").empty());
  // d1 had applied the change, then the automatic restore brought it back.
  CHECK(world->device("d1")->live.current_values.at("capabilities/sensing/polling_rate") ==
        Json(50));
  const CommissionRecord* restore = world->ledger().find("c1-restore-d1");
  REQUIRE(restore != nullptr);
  CHECK(restore->state == CommissionState::Completed);
}

TEST_CASE("the per-tick audit aborts the run on a violated constraint") {
  // Initial polling_rate 50 violates nothing; the constraint pins it under
  // 100 and the commission would raise it to 150, so the gate must deny and
  // the audit must never fire. Force a violation by mutating ground truth
  // behind the pipeline's back.
  fixtures::DeviceOpts d1{.id = "d1"};
  auto world = fixtures::make_world(
      fixtures::fleet_json({d1}, {fixtures::scenario_json(
                              "S1", {"d1"},
                              {"capabilities/sensing/polling_rate <= 100"})}));
  run_ticks(*world, 3);
  world->device_mutable("d1")->live.current_values["capabilities/sensing/polling_rate"] = 500;
  // The violating value reaches the registry with the next periodic report
  // (tick 10) and the audit must abort then.
  Status failed = Status::ok_status();
  for (Tick t = 0; t < 12; ++t) {
    failed = world->step();
    if (!failed.ok()) break;
  }
  REQUIRE_FALSE(failed.ok());
  CHECK(failed.error().category == "audit-violation");
  CHECK_FALSE(world->events().of_kind("audit-violation").empty());
}
