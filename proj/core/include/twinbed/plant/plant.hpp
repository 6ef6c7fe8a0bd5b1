#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "twinbed/common/config.hpp"
#include "twinbed/plc/control.hpp"
#include "twinbed/tagbus/message.hpp"

namespace twinbed::plant {

class UnknownTag : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class UnknownMalfunction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class SimDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SimStatus { Run, Freeze, Reset };
enum class ControlOwner { Internal, External };

std::string_view to_string(SimStatus s);
std::string_view to_string(ControlOwner o);
std::optional<SimStatus> sim_status_from_string(std::string_view s);
std::optional<ControlOwner> control_owner_from_string(std::string_view s);

namespace tags {
inline constexpr const char* kCwTemp = "CW_TEMP";
inline constexpr const char* kSgLevel = "SG_LEVEL";
inline constexpr const char* kFwFlow = "FW_FLOW";
inline constexpr const char* kStFlow = "ST_FLOW";
inline constexpr const char* kFwValvePos = "FW_VALVE_POS";
inline constexpr const char* kFwValveCmd = "FW_VALVE_CMD";
inline constexpr const char* kFwPumpOn = "FW_PUMP_ON";
inline constexpr const char* kSimStatus = "SIM_STATUS";
inline constexpr const char* kControlOwner = "CONTROL_OWNER";
}  // namespace tags

// Surrogate steam-generator / circulating-water plant parameters.
struct PlantParams {
  double sg_area_m2 = 20.0;
  double rho_kg_m3 = 750.0;
  double valve_tau_s = 2.0;
  double fw_max_kg_s = 500.0;
  double cw_tau_s = 60.0;
  double cw_ambient_c = 14.77;
  double level_setpoint_pct = 50.0;
  std::int64_t step_ms = 50;

  double level_span_m = 10.0;         // meters of water per 100 % level
  double steam_nominal_kg_s = 250.0;  // steam demand at 100 % load
  double cw_heat_load_c = 0.0;        // steady offset above ambient
  double cw_noise_sigma_c = 0.02;
  double level_noise_sigma_pct = 0.02;
  std::uint64_t seed = 1;

  plc::ControllerGains gains;  // internal three-element loop

  double nominal_valve_pos() const { return steam_nominal_kg_s / fw_max_kg_s; }
  // Level change in % per second per kg/s of mass imbalance.
  double level_gain() const { return 100.0 / (rho_kg_m3 * sg_area_m2 * level_span_m); }

  void validate() const;
  static PlantParams from_config(const KeyValueConfig& cfg);
};

struct PlantState {
  std::int64_t t_ms = 0;
  double sg_level_pct = 50.0;
  double w_fw_kg_s = 0.0;
  double w_st_kg_s = 0.0;
  double fw_valve_pos = 0.5;
  bool fw_pump_on = true;
  double fw_pump_speed = 1.0;  // coast-down fraction, lags fw_pump_on
  double cw_temp_c = 14.77;
  double cw_temp_sensor_c = 14.77;
  double sg_level_sensor_pct = 50.0;
  SimStatus sim_status = SimStatus::Run;
  ControlOwner control_owner = ControlOwner::Internal;

  bool operator==(const PlantState&) const = default;
};

PlantState nominal_state(const PlantParams& params);

// Per-step exogenous inputs for the pure integrator.
struct StepInputs {
  double valve_cmd = 0.5;
  double steam_factor = 1.0;
  double cw_noise_c = 0.0;
  double level_noise_pct = 0.0;
};

// One fixed explicit-Euler step. RUN integrates; FREEZE returns the state
// unchanged; RESET returns the nominal state with t_ms = 0. `dt_ms` must equal
// params.step_ms. Throws SimDiverged on a non-finite result.
PlantState step(const PlantState& state, const PlantParams& params, std::int64_t dt_ms, const StepInputs& in);

enum class MalfunctionKind { SensorOverride, SteamStep, PumpTrip };

std::string_view to_string(MalfunctionKind k);
// Throws UnknownMalfunction.
MalfunctionKind malfunction_kind_from_string(std::string_view s);

struct Malfunction {
  MalfunctionKind kind = MalfunctionKind::SteamStep;
  std::string tag;        // SENSOR_OVERRIDE target
  double value = 0.0;     // SENSOR_OVERRIDE pinned value
  double factor = 1.0;    // STEAM_STEP multiplier on steam demand
};

// Stateful plant: owns the state, a command mailbox applied at step
// boundaries, active malfunctions and the internal controller. Not
// thread-safe; the owning loop serializes access.
class PlantSim {
 public:
  explicit PlantSim(PlantParams params = {});

  const PlantParams& params() const { return params_; }
  const PlantState& state() const { return state_; }
  const plc::ControllerState& internal_controller() const { return controller_; }
  double valve_command() const;

  // Applies queued commands and malfunctions, then advances one step.
  void step();

  // Queued; takes effect at the next step boundary. Writing a sensor tag pins
  // its reading (SENSOR_OVERRIDE, FORCED quality). Throws UnknownTag.
  void apply_command(const std::string& tag, const tagbus::Value& value);
  // Reflects the last completed step. Throws UnknownTag.
  tagbus::TagValue read_tag(const std::string& tag) const;

  void set_status(SimStatus status);
  void set_control_owner(ControlOwner owner);

  void inject_malfunction(const Malfunction& m);
  void inject_malfunction(std::string_view kind, const std::map<std::string, std::string>& params);
  void clear_malfunctions();
  void clear_sensor_override(const std::string& tag);
  bool has_override(const std::string& tag) const { return overrides_.count(tag) != 0; }

  tagbus::Message handle(const tagbus::Message& request);

  static const std::vector<std::string>& tag_names();
  static bool is_sensor_tag(std::string_view tag);

 private:
  void apply_pending();
  void reset_to_nominal();

  PlantParams params_;
  PlantState state_;
  plc::ControllerState controller_;
  double external_cmd_;
  double last_internal_cmd_;
  double steam_factor_ = 1.0;
  std::map<std::string, double> overrides_;
  std::vector<std::pair<std::string, tagbus::Value>> pending_commands_;
  std::vector<Malfunction> pending_malfunctions_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> unit_normal_{0.0, 1.0};
};

}  // namespace twinbed::plant
