#include <doctest.h>

#include <algorithm>

#include "confab/commission.hpp"
#include "fixtures.hpp"

using namespace confab;

namespace {

struct Rig {
  OrganisationalFeatureModel ofm = fixtures::test_ofm();
  DeviceRegistry registry{ofm, 30};
  ScenarioCatalog catalog;
  CommissionLedger ledger{registry, catalog};

  Rig() {
    for (const char* id : {"d1", "d2", "d3", "d4"}) {
      fixtures::DeviceOpts o;
      o.id = id;
      auto d = DeviceDescription::from_json(fixtures::description_json(o));
      REQUIRE(d.ok());
      REQUIRE(registry
                  .register_device(d.value(),
                                   initial_state_from_description(d.value(), ofm, 0), 0)
                  .ok());
    }
    BusinessScenario s1;
    s1.scenario_id = "S1";
    s1.member_devices = {"d1", "d2", "d3"};
    REQUIRE(catalog.add_scenario(s1, registry).ok());
  }
};

PostCondition polling(long v) {
  return fixtures::set_value("capabilities/sensing/polling_rate", Json(v));
}

} // namespace

TEST_CASE("well-formed submission lands as submitted") {
  Rig rig;
  auto c = fixtures::make_commission("c1", {"S1"}, {polling(10)}, 0, 100, 5);
  auto id = rig.ledger.submit(c, 0);
  REQUIRE(id.ok());
  const CommissionRecord* rec = rig.ledger.find(id.value());
  REQUIRE(rec != nullptr);
  CHECK(rec->state == CommissionState::Submitted);
  CHECK(rec->devices.size() == 3);
  CHECK(rec->commission.submitted_at == 0);
}

TEST_CASE("window already closed at submission expires immediately") {
  Rig rig;
  auto c = fixtures::make_commission("c1", {"d1"}, {polling(10)}, 0, 10);
  auto id = rig.ledger.submit(c, 20);
  REQUIRE_FALSE(id.ok());
  CHECK(id.error().category == "expired");
  CHECK(rig.ledger.find("c1")->state == CommissionState::Expired);
}

TEST_CASE("unresolvable targets are rejected and named") {
  Rig rig;
  auto c = fixtures::make_commission("c1", {"no-such-device"}, {polling(10)});
  auto id = rig.ledger.submit(c, 0);
  REQUIRE_FALSE(id.ok());
  CHECK(id.error().category == "unresolved-target");
  CHECK(id.error().message.find("no-such-device") != std::string::npos);
  CHECK(rig.ledger.find("c1")->state == CommissionState::Rejected);
}

TEST_CASE("empty post-condition list is rejected") {
  Rig rig;
  auto c = fixtures::make_commission("c1", {"d1"}, {});
  auto id = rig.ledger.submit(c, 0);
  REQUIRE_FALSE(id.ok());
  CHECK(rig.ledger.find("c1")->state == CommissionState::Rejected);
}

TEST_CASE("post-conditions may not target read-only or invariant points") {
  Rig rig;
  auto c = fixtures::make_commission(
      "c1", {"d1"}, {fixtures::set_value("capabilities/power/supply", Json("battery"))});
  auto id = rig.ledger.submit(c, 0);
  REQUIRE_FALSE(id.ok());
  CHECK(id.error().category == "validation");
}

TEST_CASE("resolve_targets expands scenarios and deduplicates") {
  Rig rig;
  SUBCASE("scenario expansion") {
    auto c = fixtures::make_commission("c1", {"S1"}, {polling(10)});
    auto devices = resolve_targets(c, rig.registry, rig.catalog);
    REQUIRE(devices.ok());
    CHECK(devices.value() == std::set<DeviceId>{"d1", "d2", "d3"});
  }
  SUBCASE("device plus scenario deduplicates") {
    auto c = fixtures::make_commission("c1", {"d1", "S1"}, {polling(10)});
    auto devices = resolve_targets(c, rig.registry, rig.catalog);
    REQUIRE(devices.ok());
    CHECK(devices.value() == std::set<DeviceId>{"d1", "d2", "d3"});
  }
  SUBCASE("single device identity") {
    auto c = fixtures::make_commission("c1", {"d4"}, {polling(10)});
    auto devices = resolve_targets(c, rig.registry, rig.catalog);
    REQUIRE(devices.ok());
    CHECK(devices.value() == std::set<DeviceId>{"d4"});
  }
  SUBCASE("output invariant under target permutation") {
    // std::set targets make order irrelevant by construction; verify via two
    // insert orders anyway.
    Commission a = fixtures::make_commission("a", {}, {polling(10)});
    a.targets = {"d4", "S1", "d1"};
    Commission b = fixtures::make_commission("b", {}, {polling(10)});
    b.targets = {"d1", "d4", "S1"};
    CHECK(resolve_targets(a, rig.registry, rig.catalog).value() ==
          resolve_targets(b, rig.registry, rig.catalog).value());
  }
}

TEST_CASE("lifecycle transitions only move forward with increasing ticks") {
  Rig rig;
  auto c = fixtures::make_commission("c1", {"d1"}, {polling(10)});
  REQUIRE(rig.ledger.submit(c, 0).ok());

  CHECK(rig.ledger.transition("c1", CommissionState::Scheduled, 1).ok());
  CHECK_FALSE(rig.ledger.transition("c1", CommissionState::Completed, 2).ok());
  CHECK_FALSE(rig.ledger.transition("c1", CommissionState::Submitted, 2).ok());
  CHECK(rig.ledger.transition("c1", CommissionState::Building, 2).ok());
  // Same tick is not strictly increasing.
  CHECK_FALSE(rig.ledger.transition("c1", CommissionState::Shipping, 2).ok());
  CHECK(rig.ledger.transition("c1", CommissionState::Shipping, 3).ok());
  CHECK(rig.ledger.transition("c1", CommissionState::Completed, 4).ok());
  // Terminal states are final except completed -> reverted.
  CHECK_FALSE(rig.ledger.transition("c1", CommissionState::Rejected, 5).ok());
  CHECK(rig.ledger.transition("c1", CommissionState::Reverted, 5).ok());
  CHECK_FALSE(rig.ledger.transition("c1", CommissionState::Completed, 6).ok());

  const auto& log = rig.ledger.find("c1")->log;
  for (size_t i = 1; i < log.size(); ++i) {
    CHECK(log[i].tick > log[i - 1].tick);
  }
}

TEST_CASE("per-device stages resolve the commission-wide state") {
  Rig rig;
  auto c = fixtures::make_commission("c1", {"S1"}, {polling(10)});
  REQUIRE(rig.ledger.submit(c, 0).ok());
  REQUIRE(rig.ledger.transition("c1", CommissionState::Scheduled, 1).ok());
  REQUIRE(rig.ledger.transition("c1", CommissionState::Building, 2).ok());
  REQUIRE(rig.ledger.transition("c1", CommissionState::Shipping, 3).ok());

  rig.ledger.mark_device("c1", "d1", DeviceStage::Succeeded);
  CHECK_FALSE(rig.ledger.try_resolve("c1", 4)); // d2, d3 still pending
  rig.ledger.mark_device("c1", "d2", DeviceStage::Succeeded);
  rig.ledger.mark_device("c1", "d3", DeviceStage::Expired, "window closed");
  CHECK(rig.ledger.try_resolve("c1", 4));
  CHECK(rig.ledger.find("c1")->state == CommissionState::Rejected); // partial
  CHECK(rig.ledger.find("c1")->log.back().note.find("partial") != std::string::npos);
}

TEST_CASE("emit_revert restores snapshot values") {
  Rig rig;
  auto c = fixtures::make_commission("c1", {"d1"}, {polling(10)}, 0, 40, 5, "ops", Tick{50});
  REQUIRE(rig.ledger.submit(c, 0).ok());
  REQUIRE(rig.ledger.transition("c1", CommissionState::Scheduled, 1).ok());
  REQUIRE(rig.ledger.transition("c1", CommissionState::Building, 2).ok());
  REQUIRE(rig.ledger.transition("c1", CommissionState::Shipping, 3).ok());
  rig.ledger.mark_device("c1", "d1", DeviceStage::Succeeded);
  rig.ledger.set_device_refs("c1", "d1", "snap-1", "pkg-1");
  REQUIRE(rig.ledger.try_resolve("c1", 4));
  REQUIRE(rig.ledger.find("c1")->state == CommissionState::Completed);

  auto loader = [](const SnapshotId& id) -> Result<std::map<std::string, Json>> {
    CHECK(id == "snap-1");
    return std::map<std::string, Json>{{"capabilities/sensing/polling_rate", Json(50)}};
  };

  SUBCASE("not yet due") {
    auto none = rig.ledger.emit_revert("c1", 49, loader, 50);
    CHECK(none.empty());
  }
  SUBCASE("at revert_at") {
    auto reverts = rig.ledger.emit_revert("c1", 50, loader, 50);
    REQUIRE(reverts.size() == 1);
    const Commission& r = reverts[0];
    CHECK(r.source == "system");
    CHECK(r.importance == 5);
    CHECK(r.targets == std::set<std::string>{"d1"});
    REQUIRE(r.required.size() == 1);
    CHECK(r.required[0].kind == PostCondition::Kind::SetValue);
    CHECK(r.required[0].path == "capabilities/sensing/polling_rate");
    CHECK(r.required[0].value == Json(50));
    // Fires once.
    CHECK(rig.ledger.emit_revert("c1", 50, loader, 50).empty());
  }
}

TEST_CASE("revert without revert_at never fires") {
  Rig rig;
  auto c = fixtures::make_commission("c1", {"d1"}, {polling(10)});
  REQUIRE(rig.ledger.submit(c, 0).ok());
  auto loader = [](const SnapshotId&) -> Result<std::map<std::string, Json>> {
    return std::map<std::string, Json>{};
  };
  CHECK(rig.ledger.emit_revert("c1", 50, loader, 50).empty());
}

TEST_CASE("missing snapshot surfaces revert-impossible, original stays completed") {
  Rig rig;
  auto c = fixtures::make_commission("c1", {"d1"}, {polling(10)}, 0, 40, 5, "ops", Tick{50});
  REQUIRE(rig.ledger.submit(c, 0).ok());
  REQUIRE(rig.ledger.transition("c1", CommissionState::Scheduled, 1).ok());
  REQUIRE(rig.ledger.transition("c1", CommissionState::Building, 2).ok());
  REQUIRE(rig.ledger.transition("c1", CommissionState::Shipping, 3).ok());
  rig.ledger.mark_device("c1", "d1", DeviceStage::Succeeded);
  rig.ledger.set_device_refs("c1", "d1", "snap-gone", "pkg-1");
  REQUIRE(rig.ledger.try_resolve("c1", 4));

  auto loader = [](const SnapshotId& id) -> Result<std::map<std::string, Json>> {
    return make_error("not-found", "no snapshot " + id);
  };
  auto reverts = rig.ledger.emit_revert("c1", 50, loader, 50);
  CHECK(reverts.empty());
  const CommissionRecord* rec = rig.ledger.find("c1");
  CHECK(rec->state == CommissionState::Completed);
  REQUIRE_FALSE(rec->notes.empty());
  CHECK(rec->notes[0].find("revert-impossible") != std::string::npos);
}

TEST_CASE("revert child completion flips the parent to reverted") {
  Rig rig;
  auto c = fixtures::make_commission("c1", {"d1"}, {polling(10)}, 0, 40, 5, "ops", Tick{50});
  REQUIRE(rig.ledger.submit(c, 0).ok());
  REQUIRE(rig.ledger.transition("c1", CommissionState::Scheduled, 1).ok());
  REQUIRE(rig.ledger.transition("c1", CommissionState::Building, 2).ok());
  REQUIRE(rig.ledger.transition("c1", CommissionState::Shipping, 3).ok());
  rig.ledger.mark_device("c1", "d1", DeviceStage::Succeeded);
  rig.ledger.set_device_refs("c1", "d1", "snap-1", "pkg-1");
  REQUIRE(rig.ledger.try_resolve("c1", 4));

  auto loader = [](const SnapshotId&) -> Result<std::map<std::string, Json>> {
    return std::map<std::string, Json>{{"capabilities/sensing/polling_rate", Json(50)}};
  };
  auto reverts = rig.ledger.emit_revert("c1", 50, loader, 50);
  REQUIRE(reverts.size() == 1);
  REQUIRE(rig.ledger.submit(reverts[0], 50).ok());
  rig.ledger.link_revert(reverts[0].commission_id, "c1");

  const CommissionId rid = reverts[0].commission_id;
  REQUIRE(rig.ledger.transition(rid, CommissionState::Scheduled, 51).ok());
  REQUIRE(rig.ledger.transition(rid, CommissionState::Building, 52).ok());
  REQUIRE(rig.ledger.transition(rid, CommissionState::Shipping, 53).ok());
  rig.ledger.mark_device(rid, "d1", DeviceStage::Succeeded);
  REQUIRE(rig.ledger.try_resolve(rid, 54));
  rig.ledger.note_revert_completed(rid, 54);
  CHECK(rig.ledger.find("c1")->state == CommissionState::Reverted);
}
