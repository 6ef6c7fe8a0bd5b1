#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "twinbed/historian/historian.hpp"
#include "twinbed/plant/plant.hpp"
#include "twinbed/plc/plc.hpp"
#include "twinbed/tagbus/server.hpp"
#include "twinbed/twin/twin.hpp"

namespace twinbed::testbed {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

// Milliseconds of wall-clock time since the Unix epoch.
std::int64_t wall_clock_ms();

// A component running on wall-clock time: a periodic step on its own thread
// and a tag server. Steps and requests are serialized by one mutex.
class Node {
 public:
  using Step = std::function<void(std::int64_t now_ms)>;
  using OnStop = std::function<void()>;

  Node(std::string name, tagbus::Handler handler, Step step, std::int64_t period_ms, std::uint16_t port,
       std::int64_t epoch_ms, std::string host = "127.0.0.1");
  ~Node();
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  const std::string& name() const { return name_; }
  std::uint16_t port() const { return server_->port(); }
  // Stops the step loop and the server, then runs the stop hook once.
  void stop();
  void set_on_stop(OnStop fn) { on_stop_ = std::move(fn); }

 private:
  void loop();

  std::string name_;
  std::mutex mutex_;
  Step step_;
  std::int64_t period_ms_;
  std::int64_t epoch_ms_;
  std::atomic<bool> stopping_{false};
  std::unique_ptr<tagbus::TagServer> server_;
  std::thread worker_;
  OnStop on_stop_;
  std::once_flag stopped_;
};

// Component owners. Each keeps its component alive for as long as the node.
struct PlantNode {
  PlantNode(const plant::PlantParams& params, plant::ControlOwner owner, std::uint16_t port, std::int64_t epoch_ms);
  plant::PlantSim sim;
  std::unique_ptr<Node> node;
};

struct PlcNode {
  PlcNode(const plc::PlcConfig& cfg, std::uint16_t port, const Endpoint& plant, std::int64_t epoch_ms);
  tagbus::TcpLink plant_link;
  plc::PlcEmulator plc;
  std::unique_ptr<Node> node;
};

struct HistorianNode {
  HistorianNode(const historian::SensorManifest& manifest, std::uint16_t port, const Endpoint& plc,
                const Endpoint& plant, std::filesystem::path snapshot_dir, std::int64_t epoch_ms);
  tagbus::TcpLink plc_link;
  tagbus::TcpLink plant_link;
  historian::Historian historian;
  std::filesystem::path snapshot_dir;
  std::unique_ptr<Node> node;
};

struct TwinNode {
  TwinNode(const historian::SensorManifest& watch, const twin::TwinConfig& cfg, std::uint16_t port,
           const Endpoint& historian, std::int64_t epoch_ms);
  tagbus::TcpLink historian_link;
  twin::TwinMirror mirror;
  std::unique_ptr<Node> node;
};

}  // namespace twinbed::testbed
