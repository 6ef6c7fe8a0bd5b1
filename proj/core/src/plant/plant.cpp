#include "twinbed/plant/plant.hpp"

#include <algorithm>
#include <cmath>

#include "twinbed/common/text.hpp"

namespace twinbed::plant {

using tagbus::Quality;
using tagbus::TagValue;
using tagbus::Value;

std::string_view to_string(SimStatus s) {
  switch (s) {
    case SimStatus::Run: return "RUN";
    case SimStatus::Freeze: return "FREEZE";
    case SimStatus::Reset: return "RESET";
  }
  return "RUN";
}

std::string_view to_string(ControlOwner o) { return o == ControlOwner::Internal ? "INTERNAL" : "EXTERNAL"; }

std::optional<SimStatus> sim_status_from_string(std::string_view s) {
  if (s == "RUN") return SimStatus::Run;
  if (s == "FREEZE") return SimStatus::Freeze;
  if (s == "RESET") return SimStatus::Reset;
  return std::nullopt;
}

std::optional<ControlOwner> control_owner_from_string(std::string_view s) {
  if (s == "INTERNAL") return ControlOwner::Internal;
  if (s == "EXTERNAL") return ControlOwner::External;
  return std::nullopt;
}

std::string_view to_string(MalfunctionKind k) {
  switch (k) {
    case MalfunctionKind::SensorOverride: return "SENSOR_OVERRIDE";
    case MalfunctionKind::SteamStep: return "STEAM_STEP";
    case MalfunctionKind::PumpTrip: return "PUMP_TRIP";
  }
  return "?";
}

MalfunctionKind malfunction_kind_from_string(std::string_view s) {
  if (s == "SENSOR_OVERRIDE") return MalfunctionKind::SensorOverride;
  if (s == "STEAM_STEP") return MalfunctionKind::SteamStep;
  if (s == "PUMP_TRIP") return MalfunctionKind::PumpTrip;
  throw UnknownMalfunction("unknown malfunction kind '" + std::string(s) + "'");
}

void PlantParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("plant parameter ") + name + " must be positive");
  };
  positive(sg_area_m2, "sg_area_m2");
  positive(rho_kg_m3, "rho_kg_m3");
  positive(valve_tau_s, "valve_tau_s");
  positive(fw_max_kg_s, "fw_max_kg_s");
  positive(cw_tau_s, "cw_tau_s");
  positive(cw_ambient_c, "cw_ambient_c");
  positive(level_span_m, "level_span_m");
  positive(steam_nominal_kg_s, "steam_nominal_kg_s");
  if (step_ms <= 0) throw ConfigError("plant parameter step_ms must be positive");
  if (!(level_setpoint_pct > 0.0 && level_setpoint_pct < 100.0)) {
    throw ConfigError("level_setpoint_pct must lie in (0, 100)");
  }
  if (steam_nominal_kg_s > fw_max_kg_s) throw ConfigError("steam demand exceeds feedwater capacity");
  if (cw_noise_sigma_c < 0.0 || level_noise_sigma_pct < 0.0) throw ConfigError("noise sigma must be >= 0");
}

PlantParams PlantParams::from_config(const KeyValueConfig& cfg) {
  PlantParams p;
  p.sg_area_m2 = cfg.get_double("sg_area_m2", p.sg_area_m2);
  p.rho_kg_m3 = cfg.get_double("rho_kg_m3", p.rho_kg_m3);
  p.valve_tau_s = cfg.get_double("valve_tau_s", p.valve_tau_s);
  p.fw_max_kg_s = cfg.get_double("fw_max_kg_s", p.fw_max_kg_s);
  p.cw_tau_s = cfg.get_double("cw_tau_s", p.cw_tau_s);
  p.cw_ambient_c = cfg.get_double("cw_ambient_c", p.cw_ambient_c);
  p.level_setpoint_pct = cfg.get_double("level_setpoint_pct", p.level_setpoint_pct);
  p.step_ms = cfg.get_int("step_ms", p.step_ms);
  p.level_span_m = cfg.get_double("level_span_m", p.level_span_m);
  p.steam_nominal_kg_s = cfg.get_double("steam_nominal_kg_s", p.steam_nominal_kg_s);
  p.cw_heat_load_c = cfg.get_double("cw_heat_load_c", p.cw_heat_load_c);
  p.cw_noise_sigma_c = cfg.get_double("cw_noise_sigma_c", p.cw_noise_sigma_c);
  p.level_noise_sigma_pct = cfg.get_double("level_noise_sigma_pct", p.level_noise_sigma_pct);
  p.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<std::int64_t>(p.seed)));
  p.gains.kp_level = cfg.get_double("kp_level", p.gains.kp_level);
  p.gains.ki_level = cfg.get_double("ki_level", p.gains.ki_level);
  p.gains.kp_flow = cfg.get_double("kp_flow", p.gains.kp_flow);
  p.gains.ki_flow = cfg.get_double("ki_flow", p.gains.ki_flow);
  p.validate();
  return p;
}

PlantState nominal_state(const PlantParams& params) {
  PlantState s;
  s.t_ms = 0;
  s.sg_level_pct = params.level_setpoint_pct;
  s.sg_level_sensor_pct = params.level_setpoint_pct;
  s.fw_valve_pos = params.nominal_valve_pos();
  s.fw_pump_on = true;
  s.fw_pump_speed = 1.0;
  s.w_fw_kg_s = s.fw_valve_pos * params.fw_max_kg_s;
  s.w_st_kg_s = params.steam_nominal_kg_s;
  s.cw_temp_c = params.cw_ambient_c + params.cw_heat_load_c;
  s.cw_temp_sensor_c = s.cw_temp_c;
  return s;
}

PlantState step(const PlantState& state, const PlantParams& params, std::int64_t dt_ms, const StepInputs& in) {
  if (dt_ms != params.step_ms) {
    throw std::invalid_argument("plant step must use the fixed step of " + std::to_string(params.step_ms) + " ms");
  }
  if (state.sim_status == SimStatus::Freeze) return state;
  if (state.sim_status == SimStatus::Reset) {
    PlantState s = nominal_state(params);
    s.sim_status = SimStatus::Reset;
    s.control_owner = state.control_owner;
    return s;
  }

  const double dt = static_cast<double>(dt_ms) / 1000.0;
  PlantState s = state;
  const double cmd = std::clamp(in.valve_cmd, 0.0, 1.0);
  s.fw_valve_pos = std::clamp(s.fw_valve_pos + (cmd - s.fw_valve_pos) * dt / params.valve_tau_s, 0.0, 1.0);
  const double pump_target = s.fw_pump_on ? 1.0 : 0.0;
  s.fw_pump_speed = std::clamp(s.fw_pump_speed + (pump_target - s.fw_pump_speed) * dt / params.valve_tau_s, 0.0, 1.0);
  s.w_fw_kg_s = s.fw_pump_speed * s.fw_valve_pos * params.fw_max_kg_s;
  s.w_st_kg_s = params.steam_nominal_kg_s * in.steam_factor;
  s.sg_level_pct = std::clamp(s.sg_level_pct + params.level_gain() * (s.w_fw_kg_s - s.w_st_kg_s) * dt, 0.0, 100.0);
  const double cw_target = params.cw_ambient_c + params.cw_heat_load_c;
  s.cw_temp_c += (cw_target - s.cw_temp_c) * dt / params.cw_tau_s;
  s.cw_temp_sensor_c = s.cw_temp_c + in.cw_noise_c;
  s.sg_level_sensor_pct = s.sg_level_pct + in.level_noise_pct;
  s.t_ms += dt_ms;

  for (double v : {s.sg_level_pct, s.w_fw_kg_s, s.w_st_kg_s, s.fw_valve_pos, s.cw_temp_c, s.cw_temp_sensor_c,
                   s.sg_level_sensor_pct}) {
    if (!std::isfinite(v)) throw SimDiverged("plant state became non-finite at t=" + std::to_string(s.t_ms) + " ms");
  }
  return s;
}

PlantSim::PlantSim(PlantParams params)
    : params_(params), state_(nominal_state(params_)), external_cmd_(params_.nominal_valve_pos()),
      last_internal_cmd_(params_.nominal_valve_pos()),
      rng_(params_.seed) {
  params_.validate();
  controller_.gains = params_.gains;
  controller_.output_bias = params_.nominal_valve_pos();
}

const std::vector<std::string>& PlantSim::tag_names() {
  static const std::vector<std::string> names = {tags::kCwTemp,     tags::kSgLevel,    tags::kFwFlow,
                                                 tags::kStFlow,     tags::kFwValvePos, tags::kFwValveCmd,
                                                 tags::kFwPumpOn,   tags::kSimStatus,  tags::kControlOwner};
  return names;
}

bool PlantSim::is_sensor_tag(std::string_view tag) {
  return tag == tags::kCwTemp || tag == tags::kSgLevel || tag == tags::kFwFlow || tag == tags::kStFlow ||
         tag == tags::kFwValvePos;
}

double PlantSim::valve_command() const {
  return state_.control_owner == ControlOwner::External ? external_cmd_ : last_internal_cmd_;
}

void PlantSim::reset_to_nominal() {
  const auto owner = state_.control_owner;
  state_ = nominal_state(params_);
  state_.sim_status = SimStatus::Reset;
  state_.control_owner = owner;
  controller_.level_integrator = 0.0;
  controller_.flow_integrator = 0.0;
  last_internal_cmd_ = params_.nominal_valve_pos();
  external_cmd_ = params_.nominal_valve_pos();
}

void PlantSim::set_status(SimStatus status) {
  if (status == SimStatus::Reset) {
    reset_to_nominal();
  } else {
    state_.sim_status = status;
  }
}

void PlantSim::set_control_owner(ControlOwner owner) { state_.control_owner = owner; }

namespace {
std::optional<double> numeric(const Value& v) {
  if (auto d = std::get_if<double>(&v)) return *d;
  if (auto i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (auto b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  if (auto s = std::get_if<std::string>(&v)) return parse_double(*s);
  return std::nullopt;
}

std::string text_of(const Value& v) {
  if (auto s = std::get_if<std::string>(&v)) return *s;
  return {};
}
}  // namespace

void PlantSim::apply_command(const std::string& tag, const Value& value) {
  const auto& names = tag_names();
  if (std::find(names.begin(), names.end(), tag) == names.end()) throw UnknownTag("unknown plant tag " + tag);
  // Validate eagerly so the caller learns about bad values now.
  if (tag == tags::kSimStatus) {
    if (!sim_status_from_string(text_of(value))) throw std::invalid_argument("bad SIM_STATUS value");
  } else if (tag == tags::kControlOwner) {
    if (!control_owner_from_string(text_of(value))) throw std::invalid_argument("bad CONTROL_OWNER value");
  } else {
    auto n = numeric(value);
    if (!n || !std::isfinite(*n)) throw std::invalid_argument("non-numeric value for " + tag);
  }
  pending_commands_.emplace_back(tag, value);
}

void PlantSim::inject_malfunction(const Malfunction& m) {
  if (m.kind == MalfunctionKind::SensorOverride && !is_sensor_tag(m.tag)) {
    throw UnknownTag("SENSOR_OVERRIDE target is not a sensor tag: " + m.tag);
  }
  if (m.kind == MalfunctionKind::SteamStep && !(m.factor > 0.0 && std::isfinite(m.factor))) {
    throw std::invalid_argument("STEAM_STEP factor must be positive");
  }
  pending_malfunctions_.push_back(m);
}

void PlantSim::inject_malfunction(std::string_view kind, const std::map<std::string, std::string>& params) {
  Malfunction m;
  m.kind = malfunction_kind_from_string(kind);
  auto get = [&](const char* key) -> std::optional<double> {
    auto it = params.find(key);
    if (it == params.end()) return std::nullopt;
    auto v = parse_double(it->second);
    if (!v) throw std::invalid_argument(std::string("malfunction parameter ") + key + " is not numeric");
    return v;
  };
  if (m.kind == MalfunctionKind::SensorOverride) {
    auto it = params.find("tag");
    if (it == params.end()) throw std::invalid_argument("SENSOR_OVERRIDE requires tag");
    m.tag = it->second;
    auto v = get("value");
    if (!v) throw std::invalid_argument("SENSOR_OVERRIDE requires value");
    m.value = *v;
  } else if (m.kind == MalfunctionKind::SteamStep) {
    if (auto f = get("factor")) {
      m.factor = *f;
    } else if (auto pct = get("percent")) {
      m.factor = 1.0 + *pct / 100.0;
    } else {
      throw std::invalid_argument("STEAM_STEP requires factor or percent");
    }
  }
  inject_malfunction(m);
}

void PlantSim::clear_malfunctions() {
  overrides_.clear();
  steam_factor_ = 1.0;
  pending_malfunctions_.clear();
}

void PlantSim::clear_sensor_override(const std::string& tag) { overrides_.erase(tag); }

void PlantSim::apply_pending() {
  for (auto& [tag, value] : pending_commands_) {
    if (tag == tags::kSimStatus) {
      set_status(*sim_status_from_string(text_of(value)));
    } else if (tag == tags::kControlOwner) {
      set_control_owner(*control_owner_from_string(text_of(value)));
    } else if (tag == tags::kFwValveCmd) {
      external_cmd_ = std::clamp(*numeric(value), 0.0, 1.0);
    } else if (tag == tags::kFwPumpOn) {
      state_.fw_pump_on = *numeric(value) != 0.0;
    } else if (is_sensor_tag(tag)) {
      overrides_[tag] = *numeric(value);
    }
  }
  pending_commands_.clear();
  for (const auto& m : pending_malfunctions_) {
    switch (m.kind) {
      case MalfunctionKind::SensorOverride: overrides_[m.tag] = m.value; break;
      case MalfunctionKind::SteamStep: steam_factor_ = m.factor; break;
      case MalfunctionKind::PumpTrip: state_.fw_pump_on = false; break;
    }
  }
  pending_malfunctions_.clear();
}

void PlantSim::step() {
  apply_pending();
  StepInputs in;
  in.steam_factor = steam_factor_;
  if (state_.sim_status == SimStatus::Run) {
    if (state_.control_owner == ControlOwner::Internal) {
      const plc::ThreeElementInputs ci{state_.sg_level_sensor_pct, params_.level_setpoint_pct, state_.w_fw_kg_s,
                                       state_.w_st_kg_s};
      last_internal_cmd_ =
          plc::three_element_control(ci, controller_, static_cast<double>(params_.step_ms) / 1000.0).valve_cmd;
      in.valve_cmd = last_internal_cmd_;
    } else {
      in.valve_cmd = external_cmd_;
    }
    in.cw_noise_c = params_.cw_noise_sigma_c > 0.0 ? params_.cw_noise_sigma_c * unit_normal_(rng_) : 0.0;
    in.level_noise_pct = params_.level_noise_sigma_pct > 0.0 ? params_.level_noise_sigma_pct * unit_normal_(rng_) : 0.0;
  }
  state_ = plant::step(state_, params_, params_.step_ms, in);
}

TagValue PlantSim::read_tag(const std::string& tag) const {
  const auto t = state_.t_ms;
  if (auto it = overrides_.find(tag); it != overrides_.end()) {
    return tagbus::make_tag(tag, it->second, t, Quality::Forced);
  }
  if (tag == tags::kCwTemp) return tagbus::make_tag(tag, state_.cw_temp_sensor_c, t);
  if (tag == tags::kSgLevel) return tagbus::make_tag(tag, state_.sg_level_sensor_pct, t);
  if (tag == tags::kFwFlow) return tagbus::make_tag(tag, state_.w_fw_kg_s, t);
  if (tag == tags::kStFlow) return tagbus::make_tag(tag, state_.w_st_kg_s, t);
  if (tag == tags::kFwValvePos) return tagbus::make_tag(tag, state_.fw_valve_pos, t);
  if (tag == tags::kFwValveCmd) return tagbus::make_tag(tag, valve_command(), t);
  if (tag == tags::kFwPumpOn) return tagbus::make_tag(tag, state_.fw_pump_on, t);
  if (tag == tags::kSimStatus) return tagbus::make_tag(tag, std::string(to_string(state_.sim_status)), t);
  if (tag == tags::kControlOwner) return tagbus::make_tag(tag, std::string(to_string(state_.control_owner)), t);
  throw UnknownTag("unknown plant tag " + tag);
}

tagbus::Message PlantSim::handle(const tagbus::Message& request) {
  auto reply = tagbus::make_reply(request);
  switch (request.op) {
    case tagbus::Op::Read:
      for (const auto& t : request.tags) reply.reply[t] = read_tag(t);
      break;
    case tagbus::Op::Write:
    {
      // All-or-nothing: a rejected write leaves the mailbox as it was.
      const auto queued = pending_commands_.size();
      try {
        for (const auto& [name, tv] : request.writes) apply_command(name, tv.value);
      } catch (...) {
        pending_commands_.resize(queued);
        throw;
      }
      break;
    }
    case tagbus::Op::Status:
      reply.reply[tags::kSimStatus] = read_tag(tags::kSimStatus);
      reply.reply[tags::kControlOwner] = read_tag(tags::kControlOwner);
      reply.reply["T_MS"] = tagbus::make_tag("T_MS", state_.t_ms, state_.t_ms);
      break;
    case tagbus::Op::SubscribePoll:
      throw std::runtime_error("SUBSCRIBE_POLL is not supported; poll with READ");
  }
  return reply;
}

}  // namespace twinbed::plant
