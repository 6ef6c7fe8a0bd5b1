#include "twinbed/testbed/services.hpp"

#include <chrono>

#include "twinbed/common/log.hpp"

namespace twinbed::testbed {

std::int64_t wall_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

Node::Node(std::string name, tagbus::Handler handler, Step step, std::int64_t period_ms, std::uint16_t port,
           std::int64_t epoch_ms, std::string host)
    : name_(std::move(name)), step_(std::move(step)), period_ms_(period_ms), epoch_ms_(epoch_ms) {
  auto locked = [this, h = std::move(handler)](const tagbus::Message& m) {
    std::lock_guard lock(mutex_);
    return h(m);
  };
  server_ = std::make_unique<tagbus::TagServer>(locked, port, host);
  worker_ = std::thread([this] { loop(); });
  log::info(name_, "serving on " + host + ":" + std::to_string(server_->port()));
}

Node::~Node() { stop(); }

void Node::stop() {
  std::call_once(stopped_, [this] {
    stopping_ = true;
    if (worker_.joinable()) worker_.join();
    server_->stop();
    if (on_stop_) {
      std::lock_guard lock(mutex_);
      on_stop_();
    }
    log::info(name_, "stopped");
  });
}

void Node::loop() {
  using clock = std::chrono::steady_clock;
  auto next = clock::now();
  while (!stopping_) {
    {
      std::lock_guard lock(mutex_);
      try {
        step_(wall_clock_ms() - epoch_ms_);
      } catch (const std::exception& e) {
        log::error(name_, std::string("step failed: ") + e.what());
      }
    }
    next += std::chrono::milliseconds(period_ms_);
    const auto now = clock::now();
    if (next < now) next = now;
    std::this_thread::sleep_until(next);
  }
}

PlantNode::PlantNode(const plant::PlantParams& params, plant::ControlOwner owner, std::uint16_t port,
                     std::int64_t epoch_ms)
    : sim(params) {
  sim.set_control_owner(owner);
  node = std::make_unique<Node>(
      "plant", [this](const tagbus::Message& m) { return sim.handle(m); }, [this](std::int64_t) { sim.step(); },
      params.step_ms, port, epoch_ms);
}

PlcNode::PlcNode(const plc::PlcConfig& cfg, std::uint16_t port, const Endpoint& plant, std::int64_t epoch_ms)
    : plant_link(plant.host, plant.port, 200), plc(cfg, plant_link) {
  node = std::make_unique<Node>(
      "plc", [this](const tagbus::Message& m) { return plc.handle(m); },
      [this](std::int64_t now) { plc.scan(now); }, cfg.scan_period_ms, port, epoch_ms);
}

HistorianNode::HistorianNode(const historian::SensorManifest& manifest, std::uint16_t port, const Endpoint& plc,
                             const Endpoint& plant, std::filesystem::path dir, std::int64_t epoch_ms)
    : plc_link(plc.host, plc.port, 500),
      plant_link(plant.host, plant.port, 500),
      historian(manifest, {{historian::Source::Plc, &plc_link}, {historian::Source::Plant, &plant_link}}),
      snapshot_dir(std::move(dir)) {
  node = std::make_unique<Node>(
      "historian", [this](const tagbus::Message& m) { return historian.handle(m); },
      [this](std::int64_t now) { historian.poll_once(now); }, 10, port, epoch_ms);
  if (!snapshot_dir.empty()) {
    node->set_on_stop([this] {
      historian.store().save_snapshot(snapshot_dir);
      log::info("historian", "snapshot written to " + snapshot_dir.string());
    });
  }
}

TwinNode::TwinNode(const historian::SensorManifest& watch, const twin::TwinConfig& cfg, std::uint16_t port,
                   const Endpoint& historian, std::int64_t epoch_ms)
    : historian_link(historian.host, historian.port, 500), mirror(watch, cfg, historian_link) {
  node = std::make_unique<Node>(
      "twin", [this](const tagbus::Message& m) { return mirror.handle(m); },
      [this](std::int64_t now) { mirror.poll_update(now); }, 10, port, epoch_ms);
}

}  // namespace twinbed::testbed
