#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "twinbed/historian/historian.hpp"
#include "twinbed/plant/plant.hpp"
#include "twinbed/plc/plc.hpp"
#include "twinbed/tagbus/link.hpp"
#include "twinbed/twin/twin.hpp"

namespace twinbed::testbed {

// Network links of the co-simulation, named client-to-server.
enum class LinkId { PlcToPlant, HistorianToPlc, HistorianToPlant, TwinToHistorian, OperatorToPlant, OperatorToPlc };

std::string_view to_string(LinkId id);
// Accepts "plc-plant", "historian-plc", "historian-plant", "twin-historian",
// "operator-plant", "operator-plc". Throws std::invalid_argument.
LinkId link_from_string(std::string_view s);
const std::vector<LinkId>& all_links();

struct TestbedConfig {
  plant::PlantParams plant;
  plc::PlcConfig plc;
  historian::SensorManifest historian_manifest;
  historian::SensorManifest twin_manifest;
  twin::TwinConfig twin = twin::TwinConfig::defaults();
  std::int64_t tick_ms = 10;
  std::int64_t link_timeout_ms = 1000;
  // EXTERNAL hands the valve to the PLC; INTERNAL keeps the plant's own loop.
  plant::ControlOwner control_owner = plant::ControlOwner::External;

  // Historian polls every plant measurement via the PLC at 100 ms plus the
  // valve command; the twin mirrors the same tags.
  static TestbedConfig defaults();
  void validate() const;
};

// Plant, PLC, historian and twin advancing together on virtual time. Every
// exchange between them is a framed tagbus request on a loopback link, so
// frame taps see the same traffic a TCP deployment would carry.
class Testbed {
 public:
  explicit Testbed(TestbedConfig cfg);
  Testbed(const Testbed&) = delete;
  Testbed& operator=(const Testbed&) = delete;

  // Runs one tick: plant step on its period, PLC scan, historian poll,
  // twin poll.
  void tick();
  // Ticks until now() >= t_ms.
  void run_until(std::int64_t t_ms);
  std::int64_t now() const { return now_ms_; }

  using Observer = std::function<void(const Testbed&)>;
  // Called after every tick.
  void add_observer(Observer fn) { observers_.push_back(std::move(fn)); }

  plant::PlantSim& plant() { return *plant_; }
  const plant::PlantSim& plant() const { return *plant_; }
  plc::PlcEmulator& plc() { return *plc_; }
  const plc::PlcEmulator& plc() const { return *plc_; }
  historian::Historian& historian() { return *historian_; }
  const historian::Historian& historian() const { return *historian_; }
  twin::TwinMirror& twin() { return *twin_; }
  const twin::TwinMirror& twin() const { return *twin_; }
  const TestbedConfig& config() const { return cfg_; }

  tagbus::LoopbackLink& link(LinkId id);

 private:
  TestbedConfig cfg_;
  std::int64_t now_ms_ = 0;
  bool started_ = false;
  std::unique_ptr<plant::PlantSim> plant_;
  std::map<LinkId, std::unique_ptr<tagbus::LoopbackLink>> links_;
  std::unique_ptr<plc::PlcEmulator> plc_;
  std::unique_ptr<historian::Historian> historian_;
  std::unique_ptr<twin::TwinMirror> twin_;
  std::vector<Observer> observers_;
};

}  // namespace twinbed::testbed
