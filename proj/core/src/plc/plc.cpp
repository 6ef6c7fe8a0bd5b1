#include "twinbed/plc/plc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "twinbed/common/log.hpp"

namespace twinbed::plc {

using tagbus::Quality;
using tagbus::TagValue;
namespace ptags = plant::tags;

namespace {
const std::vector<std::string>& input_tags() {
  static const std::vector<std::string> names = {ptags::kSgLevel,   ptags::kFwFlow,   ptags::kStFlow,
                                                 ptags::kFwValvePos, ptags::kFwPumpOn, ptags::kCwTemp,
                                                 ptags::kSimStatus,  ptags::kControlOwner};
  return names;
}
}  // namespace

void PlcConfig::validate() const {
  if (scan_period_ms <= 0) throw ConfigError("scan_period_ms must be positive");
  if (!(level_setpoint_pct > 0.0 && level_setpoint_pct < 100.0)) throw ConfigError("level setpoint out of (0,100)");
  if (!(nominal_valve >= 0.0 && nominal_valve <= 1.0)) throw ConfigError("nominal_valve out of [0,1]");
  if (stale_after_scans < 1) throw ConfigError("stale_after_scans must be >= 1");
}

PlcConfig PlcConfig::from_config(const KeyValueConfig& cfg) {
  PlcConfig c;
  c.gains.kp_level = cfg.get_double("kp_level", c.gains.kp_level);
  c.gains.ki_level = cfg.get_double("ki_level", c.gains.ki_level);
  c.gains.kp_flow = cfg.get_double("kp_flow", c.gains.kp_flow);
  c.gains.ki_flow = cfg.get_double("ki_flow", c.gains.ki_flow);
  c.scan_period_ms = cfg.get_int("scan_period_ms", c.scan_period_ms);
  c.level_setpoint_pct = cfg.get_double("level_setpoint_pct", c.level_setpoint_pct);
  c.nominal_valve = cfg.get_double("nominal_valve", c.nominal_valve);
  c.stale_after_scans = static_cast<int>(cfg.get_int("stale_after_scans", c.stale_after_scans));
  c.validate();
  return c;
}

void TagMemory::write_output(const TagValue& tv) {
  if (!written_this_scan_.insert(tv.name).second) {
    throw std::logic_error("output " + tv.name + " written twice in one scan");
  }
  tags_[tv.name] = tv;
}

const TagValue* TagMemory::find(const std::string& name) const {
  auto it = tags_.find(name);
  return it == tags_.end() ? nullptr : &it->second;
}

SyncFlags sync_routine(const std::optional<TagValue>& status_tag, ControllerState& ctrl, double& output,
                       double nominal_output) {
  std::optional<plant::SimStatus> status;
  if (status_tag) {
    if (auto s = std::get_if<std::string>(&status_tag->value)) status = plant::sim_status_from_string(*s);
  }
  SyncFlags flags;
  flags.sim_status = status.value_or(plant::SimStatus::Freeze);
  flags.enabled = flags.sim_status == plant::SimStatus::Run;
  if (flags.sim_status == plant::SimStatus::Reset) {
    ctrl.level_integrator = 0.0;
    ctrl.flow_integrator = 0.0;
    output = nominal_output;
  }
  return flags;
}

void LogicImplant::validate() const {
  if (!(amplitude_frac >= 0.0 && amplitude_frac <= 0.1)) {
    throw std::invalid_argument("implant amplitude must lie in [0, 0.1]");
  }
  if (!(freq_hz > 0.0 && freq_hz < 50.0)) throw std::invalid_argument("implant frequency must lie in (0, 50) Hz");
}

PlcEmulator::PlcEmulator(PlcConfig cfg, tagbus::Link& plant_link)
    : cfg_(cfg), plant_(plant_link), output_(cfg.nominal_valve), level_sp_(cfg.level_setpoint_pct) {
  cfg_.validate();
  ctrl_.gains = cfg_.gains;
  ctrl_.output_bias = cfg_.nominal_valve;
  memory_.set_internal(tagbus::make_tag(tags::kLevelSp, level_sp_, 0));
  memory_.set_internal(tagbus::make_tag(ptags::kFwValveCmd, output_, 0));
}

bool PlcEmulator::is_writable(const std::string& tag) { return tag == tags::kLevelSp; }

void PlcEmulator::set_implant(const LogicImplant& implant) {
  implant.validate();
  if (implant.active && !implant_.active) implant_started_ms_ = -1;
  implant_ = implant;
}

void PlcEmulator::apply_queued_writes() {
  for (const auto& tv : queued_writes_) {
    if (tv.name == tags::kLevelSp) {
      if (auto v = tv.as_double()) level_sp_ = std::clamp(*v, 0.0, 100.0);
      memory_.set_internal(tagbus::make_tag(tags::kLevelSp, level_sp_, tv.timestamp_ms, tv.quality));
    }
  }
  queued_writes_.clear();
}

bool PlcEmulator::refresh_inputs(std::int64_t now_ms) {
  try {
    auto values = plant_.read_tags(input_tags());
    for (auto& [name, tv] : values) memory_.set_input(tv);
    last_input_ms_ = now_ms;
  } catch (const std::exception& e) {
    log::debug("plc", std::string("input read failed: ") + e.what());
  }
  const bool fresh = last_input_ms_ && now_ms - *last_input_ms_ <= cfg_.stale_after_scans * cfg_.scan_period_ms;
  if (!fresh) {
    for (const auto& name : input_tags()) {
      if (auto* tv = memory_.find(name)) {
        TagValue stale = *tv;
        stale.quality = Quality::Stale;
        memory_.set_input(stale);
      }
    }
  }
  return fresh;
}

ScanResult PlcEmulator::scan(std::int64_t now_ms) {
  ++scans_;
  memory_.begin_scan();
  apply_queued_writes();
  ScanResult result;

  const bool fresh = refresh_inputs(now_ms);
  result.stale = !fresh;
  std::optional<TagValue> status;
  if (fresh) {
    if (auto* tv = memory_.find(ptags::kSimStatus)) status = *tv;
  } else if (!stale_logged_) {
    log::warn("plc", "StaleInput: plant inputs not refreshed; outputs held");
    stale_logged_ = true;
  }
  if (fresh) stale_logged_ = false;

  sync_ = sync_routine(status, ctrl_, output_, cfg_.nominal_valve);
  result.enabled = sync_.enabled;
  memory_.set_internal(tagbus::make_tag(tags::kEnabled, sync_.enabled, now_ms));
  memory_.set_internal(tagbus::make_tag(tags::kScanCount, static_cast<std::int64_t>(scans_), now_ms));
  if (!sync_.enabled) return result;

  auto input = [&](const char* name) -> double {
    const auto* tv = memory_.find(name);
    auto v = tv ? tv->as_double() : std::nullopt;
    return v ? *v : std::nan("");
  };
  ThreeElementInputs in{input(ptags::kSgLevel), level_sp_, input(ptags::kFwFlow), input(ptags::kStFlow)};

  const double dt_s = static_cast<double>(cfg_.scan_period_ms) / 1000.0;
  double implant_signal = 0.0;
#if defined(TWINBED_PLC_IMPLANT_HOOK)
  if (implant_.active && implant_.amplitude_frac != 0.0) {
    if (implant_started_ms_ < 0) implant_started_ms_ = now_ms;
    const double t = static_cast<double>(now_ms - implant_started_ms_) / 1000.0;
    implant_signal = implant_.amplitude_frac * std::sin(2.0 * std::numbers::pi * implant_.freq_hz * t);
    if (implant_.target == ImplantTarget::SensorIn) in.level_pct += 100.0 * implant_signal;
  }
#endif

  ControllerState next = ctrl_;
  ThreeElementOutput out;
  try {
    out = three_element_control(in, next, dt_s);
  } catch (const ControlFault& e) {
    log::warn("plc", std::string("ControlFault, output held: ") + e.what());
    return result;
  }
  ctrl_ = next;
  double cmd = out.valve_cmd;
#if defined(TWINBED_PLC_IMPLANT_HOOK)
  if (implant_signal != 0.0 && implant_.target == ImplantTarget::ActuatorOut) {
    cmd = std::clamp(cmd + implant_signal, 0.0, 1.0);
  }
#endif
  output_ = cmd;

  memory_.write_output(tagbus::make_tag(ptags::kFwValveCmd, output_, now_ms));
  memory_.set_internal(tagbus::make_tag(tags::kFlowSp, out.flow_setpoint, now_ms));
  memory_.set_internal(tagbus::make_tag(tags::kLevelInt, ctrl_.level_integrator, now_ms));
  memory_.set_internal(tagbus::make_tag(tags::kFlowInt, ctrl_.flow_integrator, now_ms));
  try {
    plant_.write_tag(tagbus::make_tag(ptags::kFwValveCmd, output_, now_ms));
    result.written_cmd = output_;
  } catch (const std::exception& e) {
    log::debug("plc", std::string("valve command write failed: ") + e.what());
  }
  return result;
}

tagbus::Message PlcEmulator::handle(const tagbus::Message& request) {
  auto reply = tagbus::make_reply(request);
  switch (request.op) {
    case tagbus::Op::Read:
      for (const auto& t : request.tags) {
        const auto* tv = memory_.find(t);
        if (!tv) throw plant::UnknownTag("unknown PLC tag " + t);
        reply.reply[t] = *tv;
      }
      break;
    case tagbus::Op::Write:
      for (const auto& [name, tv] : request.writes) {
        if (!memory_.find(name)) throw plant::UnknownTag("unknown PLC tag " + name);
        if (!is_writable(name)) throw std::runtime_error("PLC tag " + name + " is read-only");
        if (!tv.as_double()) throw std::runtime_error("PLC tag " + name + " requires a numeric value");
      }
      for (const auto& [name, tv] : request.writes) queued_writes_.push_back(tv);
      break;
    case tagbus::Op::Status:
      reply.reply[tags::kEnabled] = tagbus::make_tag(tags::kEnabled, sync_.enabled, 0);
      reply.reply[ptags::kSimStatus] =
          tagbus::make_tag(ptags::kSimStatus, std::string(plant::to_string(sync_.sim_status)), 0);
      reply.reply[tags::kScanCount] = tagbus::make_tag(tags::kScanCount, static_cast<std::int64_t>(scans_), 0);
      break;
    case tagbus::Op::SubscribePoll:
      throw std::runtime_error("SUBSCRIBE_POLL is not supported; poll with READ");
  }
  return reply;
}

}  // namespace twinbed::plc
