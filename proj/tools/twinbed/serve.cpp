#include <signal.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <stdexcept>

#include "commands.hpp"
#include "twinbed/common/config.hpp"
#include "twinbed/common/log.hpp"
#include "twinbed/testbed/services.hpp"
#include "twinbed/testbed/supervisor.hpp"
#include "twinbed/testbed/testbed.hpp"

namespace twinbed::cli {

namespace {

namespace fs = std::filesystem;
using testbed::Endpoint;

struct ServeArgs {
  std::string component;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string config;
  std::uint16_t plant_port = 4810;
  std::uint16_t plc_port = 4811;
  std::uint16_t historian_port = 4812;
  std::string snapshot_dir;
  std::int64_t epoch_ms = 0;
};

// Manifest named by the `manifest` key, else the default polling set.
historian::SensorManifest manifest_from(const KeyValueConfig& cfg, const fs::path& base) {
  if (!cfg.has("manifest")) return testbed::TestbedConfig::defaults().historian_manifest;
  fs::path p = cfg.require_string("manifest");
  return historian::load_manifest(p.is_absolute() ? p : base / p);
}

sigset_t stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  return set;
}

void serve(const ServeArgs& a) {
  // Block before any thread starts so that only sigwait sees the signals.
  const sigset_t set = stop_signals();
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  const auto cfg = KeyValueConfig::load(a.config);
  const auto base = fs::path(a.config).parent_path();
  const auto epoch = a.epoch_ms != 0 ? a.epoch_ms : testbed::wall_clock_ms();

  std::unique_ptr<testbed::PlantNode> plant;
  std::unique_ptr<testbed::PlcNode> plc;
  std::unique_ptr<testbed::HistorianNode> hist;
  std::unique_ptr<testbed::TwinNode> twin;
  testbed::Node* node = nullptr;

  if (a.component == "plant") {
    const auto owner = cfg.get_string("control_owner", "EXTERNAL");
    auto parsed = plant::control_owner_from_string(owner);
    if (!parsed) throw ConfigError("control_owner must be INTERNAL or EXTERNAL, got " + owner);
    plant = std::make_unique<testbed::PlantNode>(plant::PlantParams::from_config(cfg), *parsed, a.port, epoch);
    node = plant->node.get();
  } else if (a.component == "plc") {
    plc = std::make_unique<testbed::PlcNode>(plc::PlcConfig::from_config(cfg), a.port,
                                             Endpoint{a.host, a.plant_port}, epoch);
    node = plc->node.get();
  } else if (a.component == "historian") {
    fs::path snap = a.snapshot_dir;
    if (snap.empty() && cfg.has("snapshot_dir")) snap = base / cfg.require_string("snapshot_dir");
    hist = std::make_unique<testbed::HistorianNode>(manifest_from(cfg, base), a.port, Endpoint{a.host, a.plc_port},
                                                    Endpoint{a.host, a.plant_port}, snap, epoch);
    node = hist->node.get();
  } else if (a.component == "twin") {
    twin = std::make_unique<testbed::TwinNode>(manifest_from(cfg, base), twin::TwinConfig::from_config(cfg), a.port,
                                               Endpoint{a.host, a.historian_port}, epoch);
    node = twin->node.get();
  } else {
    throw std::invalid_argument("unknown component " + a.component);
  }

  std::cout << a.component << " listening on " << a.host << ":" << node->port() << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  log::info(a.component, std::string("received ") + (sig == SIGINT ? "SIGINT" : "SIGTERM"));
  node->stop();
}

}  // namespace

void add_serve(CLI::App& app) {
  auto args = std::make_shared<ServeArgs>();
  auto* cmd = app.add_subcommand("serve", "Run one component as a TCP tag server until SIGTERM");
  cmd->add_option("component", args->component, "plant, plc, historian or twin")
      ->required()
      ->check(CLI::IsMember({"plant", "plc", "historian", "twin"}));
  cmd->add_option("--port", args->port, "Listen port")->required();
  cmd->add_option("--config", args->config, "Component config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--host", args->host, "Address for listening and for peers");
  cmd->add_option("--plant-port", args->plant_port, "Plant port (plc, historian)");
  cmd->add_option("--plc-port", args->plc_port, "PLC port (historian)");
  cmd->add_option("--historian-port", args->historian_port, "Historian port (twin)");
  cmd->add_option("--snapshot-dir", args->snapshot_dir, "Historian snapshot written on shutdown");
  cmd->add_option("--epoch", args->epoch_ms, "Shared time base, Unix milliseconds");
  cmd->callback([args] { serve(*args); });
}

void add_up_down(CLI::App& app) {
  auto topo = std::make_shared<std::string>();
  auto* up = app.add_subcommand("up", "Start the components of a topology and supervise them");
  up->add_option("--topology", *topo, "Topology file")->required()->check(CLI::ExistingFile);
  up->callback([topo] {
    auto topology = testbed::Topology::load(*topo);
    testbed::Supervisor sup(topology, fs::read_symlink("/proc/self/exe"));
    // A SIGTERM during startup is held until wait() picks it up.
    sigset_t set = stop_signals();
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    fs::create_directories(topology.run_dir);
    const auto pid_file = topology.run_dir / "supervisor.pid";
    {
      std::ofstream out(pid_file);
      out << ::getpid() << "\n";
    }
    try {
      sup.up();
    } catch (...) {
      fs::remove(pid_file);
      throw;
    }
    for (const auto& c : sup.children()) {
      std::cout << c.name << " ready on port " << c.port << " pid " << c.pid << "\n";
    }
    std::cout << "up" << std::endl;
    const int abnormal = sup.wait();
    fs::remove(pid_file);
    if (abnormal > 0) throw std::runtime_error(std::to_string(abnormal) + " component(s) exited abnormally");
    std::cout << "down" << std::endl;
  });

  auto down_topo = std::make_shared<std::string>();
  auto run_dir = std::make_shared<std::string>();
  auto* down = app.add_subcommand("down", "Stop the components started by `up`");
  auto* t = down->add_option("--topology", *down_topo, "Topology file")->check(CLI::ExistingFile);
  auto* r = down->add_option("--run-dir", *run_dir, "Run directory holding the pid files");
  t->excludes(r);
  down->callback([down_topo, run_dir] {
    fs::path dir = *run_dir;
    if (!down_topo->empty()) dir = testbed::Topology::load(*down_topo).run_dir;
    if (dir.empty()) throw std::invalid_argument("down needs --topology or --run-dir");
    const int n = testbed::stop_run_dir(dir);
    std::cout << "stopped " << n << " component(s)" << std::endl;
  });
}

}  // namespace twinbed::cli
