// confab — autonomous configuration service for simulated IoT fleets.
// Subcommands: commission {submit,status}, transform list, store {ls,show,gc},
// rollout {run,status}, sim run, metrics export, serve.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include <CLI11.hpp>

#include "confab/canonical.hpp"
#include "confab/config.hpp"
#include "confab/docio.hpp"
#include "confab/fleet_sim.hpp"

namespace fs = std::filesystem;
using namespace confab;

namespace {

int fail(const Error& err) {
  std::cerr << "error " << err.category << ": " << err.message << "\n";
  return 1;
}

struct GlobalFlags {
  std::string config_path;
  std::string policy;
  std::string store_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

Result<RunConfig> effective_config(const GlobalFlags& flags) {
  RunConfig config;
  if (!flags.config_path.empty()) {
    auto loaded = load_config(flags.config_path);
    if (!loaded.ok()) return loaded.error();
    config = loaded.value();
  }
  if (!flags.policy.empty()) config.policy = flags.policy;
  if (!flags.store_dir.empty()) config.store_dir = flags.store_dir;
  if (flags.seed_set) config.seed = flags.seed;
  return config;
}

// A workspace is a world built from the configured fleet plus persisted
// mutable state under <store_dir>/workspace.json.
struct Workspace {
  std::unique_ptr<World> world;
  std::string state_path;
  std::string events_path;

  Status persist() {
    if (state_path.empty()) return Status::ok_status();
    auto written = write_document(state_path, world->save_state());
    if (!written.ok()) return written;
    std::ofstream out(events_path, std::ios::binary | std::ios::app);
    if (out) out << world->events().serialize();
    return Status::ok_status();
  }
};

Result<Workspace> open_workspace(const RunConfig& config) {
  if (config.fleet_path.empty()) {
    return make_error("usage", "no fleet configured; set \"fleet\" in the config file");
  }
  auto fleet_doc = load_document(config.fleet_path);
  if (!fleet_doc.ok()) return fleet_doc.error();
  auto bootstrap = fleet_from_json(fleet_doc.value());
  if (!bootstrap.ok()) return bootstrap.error();

  Workspace ws;
  ws.world = std::make_unique<World>(config);
  auto init = ws.world->init(std::move(bootstrap).take());
  if (!init.ok()) return init.error();

  if (!config.components_dir.empty()) {
    auto components = load_components_dir(config.components_dir);
    if (!components.ok()) return components.error();
    for (auto& c : components.value()) {
      auto added = ws.world->add_component(std::move(c));
      if (!added.ok()) return added.error();
    }
  }

  if (!config.store_dir.empty()) {
    fs::create_directories(config.store_dir);
    ws.state_path = (fs::path(config.store_dir) / "workspace.json").string();
    ws.events_path = (fs::path(config.store_dir) / "events.ndjson").string();
    if (fs::exists(ws.state_path)) {
      auto state = load_document(ws.state_path);
      if (!state.ok()) return state.error();
      auto restored = ws.world->restore_state(state.value());
      if (!restored.ok()) return restored.error();
    }
  }
  return ws;
}

int cmd_commission_submit(const RunConfig& config, const std::string& file) {
  auto ws = open_workspace(config);
  if (!ws.ok()) return fail(ws.error());
  auto doc = load_document(file);
  if (!doc.ok()) return fail(doc.error());
  auto commission = Commission::from_json(doc.value());
  if (!commission.ok()) return fail(commission.error());
  auto id = ws.value().world->submit_commission(commission.value());
  auto persisted = ws.value().persist();
  if (!persisted.ok()) return fail(persisted.error());
  if (!id.ok()) return fail(id.error());
  std::cout << "commission " << id.value() << " submitted at tick "
            << ws.value().world->now() << "\n";
  return 0;
}

int cmd_commission_status(const RunConfig& config, const std::string& id) {
  auto ws = open_workspace(config);
  if (!ws.ok()) return fail(ws.error());
  const CommissionRecord* rec = ws.value().world->ledger().find(id);
  if (rec == nullptr) return fail(make_error("not-found", "unknown commission " + id));
  std::cout << "commission " << id << ": " << commission_state_name(rec->state) << "\n";
  for (const auto& tr : rec->log) {
    std::cout << "  tick " << tr.tick << ": ";
    if (tr.from == tr.to) {
      std::cout << commission_state_name(tr.to);
    } else {
      std::cout << commission_state_name(tr.from) << " -> " << commission_state_name(tr.to);
    }
    if (!tr.note.empty()) std::cout << " (" << tr.note << ")";
    std::cout << "\n";
  }
  for (const auto& [device, pipeline] : rec->devices) {
    std::cout << "  device " << device << ": " << device_stage_name(pipeline.stage);
    if (!pipeline.detail.empty()) std::cout << " (" << pipeline.detail << ")";
    std::cout << "\n";
  }
  for (const auto& note : rec->notes) std::cout << "  note: " << note << "\n";
  return 0;
}

int cmd_transform_list(const RunConfig& config) {
  auto ws = open_workspace(config);
  if (!ws.ok()) return fail(ws.error());
  auto components = ws.value().world->artifacts().list_components();
  std::cout << "kind\tname\tplatform\tos\tversions\n";
  for (const auto& c : components) {
    std::cout << c.key.kind << '\t' << c.key.name << '\t' << c.key.platform << '\t'
              << c.key.os_platform << '\t' << c.os_versions.text() << "\n";
  }
  return 0;
}

int cmd_store_ls(const RunConfig& config) {
  auto ws = open_workspace(config);
  if (!ws.ok()) return fail(ws.error());
  auto& store = ws.value().world->store();
  std::cout << "packages:\n";
  for (const StoredPackage* sp : store.list_packages()) {
    std::cout << "  " << sp->package.package_id << " device=" << sp->package.device_id
              << " commission=" << sp->package.commission_id
              << (sp->golden ? " golden" : "") << " stored_at=" << sp->stored_at << "\n";
  }
  std::cout << "snapshots:\n";
  for (const Snapshot* s : store.list_snapshots()) {
    std::cout << "  " << s->snapshot_id << " device=" << s->device_id
              << " taken_at=" << s->taken_at << "\n";
  }
  return 0;
}

int cmd_store_show(const RunConfig& config, const std::string& id) {
  auto ws = open_workspace(config);
  if (!ws.ok()) return fail(ws.error());
  auto& store = ws.value().world->store();
  auto pkg = store.get_package(id, ws.value().world->now());
  if (pkg.ok()) {
    std::cout << canonical_dump(pkg.value().to_json());
    return 0;
  }
  if (pkg.error().category == "corruption" || pkg.error().category == "integrity") {
    return fail(pkg.error());
  }
  auto snap = store.get_snapshot(id);
  if (snap.ok()) {
    std::cout << canonical_dump(snap.value().to_json());
    return 0;
  }
  return fail(make_error("not-found", "no package or snapshot " + id));
}

int cmd_store_gc(const RunConfig& config) {
  auto ws = open_workspace(config);
  if (!ws.ok()) return fail(ws.error());
  auto report = ws.value().world->store().gc(config.package_capacity, config.snapshot_capacity,
                                             ws.value().world->pinned_snapshots());
  for (const auto& id : report.evicted_packages) std::cout << "evicted package " << id << "\n";
  for (const auto& id : report.evicted_snapshots) std::cout << "evicted snapshot " << id << "\n";
  std::cout << "gc: " << report.evicted_packages.size() << " packages, "
            << report.evicted_snapshots.size() << " snapshots evicted\n";
  return 0;
}

int cmd_rollout_run(const RunConfig& config, Tick max_ticks) {
  auto ws = open_workspace(config);
  if (!ws.ok()) return fail(ws.error());
  World& world = *ws.value().world;
  Tick start = world.now();
  auto ran = world.run_to_quiescence(max_ticks);
  auto persisted = ws.value().persist();
  if (!ran.ok()) return fail(ran.error());
  if (!persisted.ok()) return fail(persisted.error());
  std::cout << "advanced from tick " << start << " to " << world.now() << "\n";
  for (const TransmissionPlan* plan : world.rollouts().all_plans()) {
    size_t done = 0;
    for (const auto& [id, d] : plan->devices) {
      (void)id;
      if (d.status == DeliveryStatus::Executed) ++done;
    }
    std::cout << "rollout " << plan->rollout_id << " commission=" << plan->commission_id
              << " strategy=" << strategy_kind_name(plan->strategy.kind) << " executed=" << done
              << "/" << plan->devices.size() << "\n";
  }
  for (const CommissionRecord* rec : world.ledger().all()) {
    std::cout << "commission " << rec->commission.commission_id << ": "
              << commission_state_name(rec->state) << "\n";
  }
  return 0;
}

int cmd_rollout_status(const RunConfig& config, const std::string& id) {
  auto ws = open_workspace(config);
  if (!ws.ok()) return fail(ws.error());
  const TransmissionPlan* plan = ws.value().world->rollouts().find(id);
  if (plan == nullptr) return fail(make_error("not-found", "unknown rollout " + id));
  std::cout << canonical_dump(plan->to_json());
  return 0;
}

int cmd_sim_run(const RunConfig& base, const std::string& scenario_path, Tick ticks,
                const std::string& out_path) {
  auto doc = load_document(scenario_path);
  if (!doc.ok()) return fail(doc.error());
  auto run = scenario_run_from_json(doc.value(), base);
  if (!run.ok()) return fail(run.error());

  World world(run.value().config);
  auto init = world.init(std::move(run.value().fleet));
  if (!init.ok()) return fail(init.error());
  // Inline components take precedence over the configured directory.
  if (doc.value().contains("components")) {
    for (const auto& cj : doc.value()["components"]) {
      auto component = TransformationComponent::from_json(cj);
      if (!component.ok()) return fail(component.error());
      auto added = world.add_component(component.value());
      if (!added.ok()) return fail(added.error());
    }
  } else if (!run.value().config.components_dir.empty()) {
    auto components = load_components_dir(run.value().config.components_dir);
    if (!components.ok()) return fail(components.error());
    for (auto& c : components.value()) {
      auto added = world.add_component(std::move(c));
      if (!added.ok()) return fail(added.error());
    }
  }
  for (auto& [at, commission] : run.value().schedule) {
    world.schedule_commission(at, commission);
  }

  Status result = world.run_until(ticks);
  if (!out_path.empty()) {
    auto written = world.events().write_to(out_path);
    if (!written.ok()) return fail(written.error());
  } else {
    std::cout << world.events().serialize();
  }
  if (!result.ok()) return fail(result.error());
  std::cerr << "simulated " << ticks << " ticks, " << world.events().events().size()
            << " events\n";
  return 0;
}

int cmd_metrics_export(const RunConfig& config, const std::string& out_path) {
  auto ws = open_workspace(config);
  if (!ws.ok()) return fail(ws.error());
  std::string csv = metrics_csv(ws.value().world->rollouts().transfer_log());
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) return fail(make_error("io", "cannot write " + out_path));
  out << csv;
  std::cout << "metrics written to " << out_path << "\n";
  return 0;
}

int cmd_serve(const RunConfig& config, const std::string& inbox, long interval_ms,
              Tick max_ticks) {
  auto ws = open_workspace(config);
  if (!ws.ok()) return fail(ws.error());
  World& world = *ws.value().world;
  fs::create_directories(inbox);
  fs::path processed = fs::path(inbox) / "processed";
  fs::create_directories(processed);

  Tick served = 0;
  while (max_ticks <= 0 || served < max_ticks) {
    std::vector<fs::path> docs;
    for (const auto& e : fs::directory_iterator(inbox)) {
      if (e.is_regular_file() && e.path().extension() == ".json") docs.push_back(e.path());
    }
    std::sort(docs.begin(), docs.end());
    for (const auto& path : docs) {
      auto doc = load_document(path.string());
      if (doc.ok()) {
        auto commission = Commission::from_json(doc.value());
        if (commission.ok()) {
          auto id = world.submit_commission(commission.value());
          if (id.ok()) {
            std::cout << "inbox: commission " << id.value() << " submitted\n";
          } else {
            std::cout << "inbox: " << path.filename().string() << " rejected ("
                      << id.error().category << ")\n";
          }
        } else {
          std::cout << "inbox: " << path.filename().string() << " unparsable\n";
        }
      }
      fs::rename(path, processed / path.filename());
    }
    auto stepped = world.step();
    if (!stepped.ok()) {
      ws.value().persist();
      return fail(stepped.error());
    }
    ++served;
    auto persisted = ws.value().persist();
    if (!persisted.ok()) return fail(persisted.error());
    if (interval_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(interval_ms));
    }
  }
  std::cout << "served " << served << " ticks, now at tick " << world.now() << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"confab — autonomous configuration service for local IoT clouds"};
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "configuration document");
  app.add_option("--policy", flags.policy, "scheduling policy")
      ->check(CLI::IsMember({"static", "market", "fifo"}));
  app.add_option("--store", flags.store_dir, "store directory override");
  auto* seed_opt = app.add_option("--seed", flags.seed, "simulation seed");

  // commission
  auto* commission = app.add_subcommand("commission", "submit and inspect commissions");
  commission->require_subcommand(1);
  std::string submit_file;
  auto* submit = commission->add_subcommand("submit", "submit a commission document");
  submit->add_option("file", submit_file, "commission document")->required();
  std::string status_id;
  auto* status = commission->add_subcommand("status", "print status and transition log");
  status->add_option("id", status_id, "commission id")->required();

  // transform
  auto* transform = app.add_subcommand("transform", "transformation components");
  auto* transform_list = transform->add_subcommand("list", "print the resolution table");

  // store
  auto* store = app.add_subcommand("store", "artifact and configuration stores");
  store->require_subcommand(1);
  auto* store_ls = store->add_subcommand("ls", "list stored packages and snapshots");
  std::string show_id;
  auto* store_show = store->add_subcommand("show", "print one stored object");
  store_show->add_option("id", show_id, "package or snapshot id")->required();
  auto* store_gc = store->add_subcommand("gc", "evict beyond capacity (golden pinned)");

  // rollout
  auto* rollout = app.add_subcommand("rollout", "run and inspect rollouts");
  rollout->require_subcommand(1);
  Tick max_ticks = 200;
  std::string run_strategy;
  long origin_fanout = 0, seeder_fanout = 0;
  Tick poll_period = 0;
  auto* rollout_run = rollout->add_subcommand("run", "advance until quiescent");
  rollout_run->add_option("--strategy", run_strategy, "rollout strategy")
      ->check(CLI::IsMember({"pull", "push", "seed"}));
  rollout_run->add_option("--origin-fanout", origin_fanout, "origin packages per tick");
  rollout_run->add_option("--seeder-fanout", seeder_fanout, "seeder packages per tick");
  rollout_run->add_option("--poll-period", poll_period, "pull poll period");
  rollout_run->add_option("--max-ticks", max_ticks, "tick budget");
  std::string rollout_id;
  auto* rollout_status = rollout->add_subcommand("status", "print one rollout plan");
  rollout_status->add_option("id", rollout_id, "rollout id")->required();

  // sim
  auto* sim = app.add_subcommand("sim", "deterministic scenario simulation");
  sim->require_subcommand(1);
  std::string scenario_path, sim_out;
  Tick sim_ticks = 100;
  auto* sim_run = sim->add_subcommand("run", "run a scenario file");
  sim_run->add_option("--scenario", scenario_path, "scenario document")->required();
  sim_run->add_option("--ticks", sim_ticks, "ticks to simulate");
  sim_run->add_option("--out", sim_out, "event log path (default stdout)");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "metrics export");
  std::string metrics_out;
  auto* metrics_export_cmd = metrics->add_subcommand("export", "write transfer metrics CSV");
  metrics_export_cmd->add_option("--out", metrics_out, "output path")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "run the orchestration loop with an inbox");
  std::string inbox = "inbox";
  long interval_ms = 100;
  Tick serve_ticks = 0;
  serve->add_option("--inbox", inbox, "watched commission inbox directory");
  serve->add_option("--interval-ms", interval_ms, "sleep between ticks");
  serve->add_option("--max-ticks", serve_ticks, "stop after N ticks (0 = run until killed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  flags.seed_set = seed_opt->count() > 0;

  auto config = effective_config(flags);
  if (!config.ok()) return fail(config.error());
  RunConfig cfg = config.value();

  if (submit->parsed()) return cmd_commission_submit(cfg, submit_file);
  if (status->parsed()) return cmd_commission_status(cfg, status_id);
  if (transform_list->parsed()) return cmd_transform_list(cfg);
  if (store_ls->parsed()) return cmd_store_ls(cfg);
  if (store_show->parsed()) return cmd_store_show(cfg, show_id);
  if (store_gc->parsed()) return cmd_store_gc(cfg);
  if (rollout_run->parsed()) {
    if (!run_strategy.empty()) cfg.strategy = run_strategy;
    if (origin_fanout > 0) cfg.origin_fanout = origin_fanout;
    if (seeder_fanout > 0) cfg.seeder_fanout = seeder_fanout;
    if (poll_period > 0) cfg.poll_period = poll_period;
    return cmd_rollout_run(cfg, max_ticks);
  }
  if (rollout_status->parsed()) return cmd_rollout_status(cfg, rollout_id);
  if (sim_run->parsed()) return cmd_sim_run(cfg, scenario_path, sim_ticks, sim_out);
  if (metrics_export_cmd->parsed()) return cmd_metrics_export(cfg, metrics_out);
  if (serve->parsed()) return cmd_serve(cfg, inbox, interval_ms, serve_ticks);

  std::cerr << app.help();
  return 2;
}
