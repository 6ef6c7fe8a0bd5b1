#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "twinbed/common/config.hpp"
#include "twinbed/plant/plant.hpp"
#include "twinbed/plc/control.hpp"
#include "twinbed/tagbus/link.hpp"

namespace twinbed::plc {

namespace tags {
inline constexpr const char* kLevelSp = "LEVEL_SP";
inline constexpr const char* kFlowSp = "FLOW_SP";
inline constexpr const char* kLevelInt = "LEVEL_INT";
inline constexpr const char* kFlowInt = "FLOW_INT";
inline constexpr const char* kEnabled = "PLC_ENABLED";
inline constexpr const char* kScanCount = "SCAN_COUNT";
}  // namespace tags

struct PlcConfig {
  ControllerGains gains;
  std::int64_t scan_period_ms = 10;
  double level_setpoint_pct = 50.0;
  double nominal_valve = 0.5;
  // Inputs older than this many scan periods are STALE.
  int stale_after_scans = 2;

  void validate() const;
  static PlcConfig from_config(const KeyValueConfig& cfg);
};

// Tag table of the controller: plant inputs mirrored each scan, the valve
// command output, and internal loop tags.
class TagMemory {
 public:
  void begin_scan() { written_this_scan_.clear(); }
  void set_input(const tagbus::TagValue& tv) { tags_[tv.name] = tv; }
  // Throws std::logic_error if the output was already written this scan.
  void write_output(const tagbus::TagValue& tv);
  void set_internal(const tagbus::TagValue& tv) { tags_[tv.name] = tv; }

  const tagbus::TagValue* find(const std::string& name) const;
  const std::map<std::string, tagbus::TagValue>& all() const { return tags_; }

 private:
  std::map<std::string, tagbus::TagValue> tags_;
  std::set<std::string> written_this_scan_;
};

struct SyncFlags {
  plant::SimStatus sim_status = plant::SimStatus::Freeze;
  bool enabled = false;

  bool operator==(const SyncFlags&) const = default;
};

// Maps the simulator status tag to scan permissions. RUN enables the scan;
// FREEZE holds; RESET zeroes both integrators and returns the output to
// `nominal_output`. A missing or unparsable status is treated as FREEZE.
SyncFlags sync_routine(const std::optional<tagbus::TagValue>& status_tag, ControllerState& ctrl, double& output,
                       double nominal_output);

enum class ImplantTarget { SensorIn, ActuatorOut };

// Dormant scan hook: a sinusoid injected into the level input or the valve
// output. Parameters arrive only through the scenario runner.
struct LogicImplant {
  double amplitude_frac = 0.0;  // of valve span (or level span for SensorIn)
  double freq_hz = 1.0;
  ImplantTarget target = ImplantTarget::ActuatorOut;
  bool active = false;

  void validate() const;
};

class StaleInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScanResult {
  bool enabled = false;
  bool stale = false;
  std::optional<double> written_cmd;
};

class PlcEmulator {
 public:
  PlcEmulator(PlcConfig cfg, tagbus::Link& plant_link);

  // One scan at controller time `now_ms`: read inputs, run the sync routine,
  // execute the three-element law when enabled, write FW_VALVE_CMD.
  ScanResult scan(std::int64_t now_ms);

  // Reads answer from tag memory; writes are queued for the next scan.
  tagbus::Message handle(const tagbus::Message& request);

  void set_implant(const LogicImplant& implant);
  const LogicImplant& implant() const { return implant_; }

  const PlcConfig& config() const { return cfg_; }
  const TagMemory& memory() const { return memory_; }
  const ControllerState& controller() const { return ctrl_; }
  const SyncFlags& sync() const { return sync_; }
  double valve_command() const { return output_; }
  std::uint64_t scan_count() const { return scans_; }

  static bool is_writable(const std::string& tag);

 private:
  void apply_queued_writes();
  bool refresh_inputs(std::int64_t now_ms);

  PlcConfig cfg_;
  tagbus::TagClient plant_;
  TagMemory memory_;
  ControllerState ctrl_;
  SyncFlags sync_;
  LogicImplant implant_;
  std::int64_t implant_started_ms_ = -1;
  double output_;
  double level_sp_;
  std::optional<std::int64_t> last_input_ms_;
  std::vector<tagbus::TagValue> queued_writes_;
  std::uint64_t scans_ = 0;
  bool stale_logged_ = false;
};

}  // namespace twinbed::plc
