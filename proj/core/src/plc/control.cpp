#include "twinbed/plc/control.hpp"

#include <algorithm>
#include <cmath>

namespace twinbed::plc {

ThreeElementOutput three_element_control(const ThreeElementInputs& in, ControllerState& state, double dt_s) {
  if (!std::isfinite(in.level_pct) || !std::isfinite(in.level_setpoint_pct) || !std::isfinite(in.feed_flow_kg_s) ||
      !std::isfinite(in.steam_flow_kg_s) || !std::isfinite(dt_s)) {
    throw ControlFault("non-finite controller input");
  }
  const auto& g = state.gains;
  const double e_level = in.level_setpoint_pct - in.level_pct;
  const double flow_sp = in.steam_flow_kg_s + g.kp_level * e_level + g.ki_level * state.level_integrator;
  const double e_flow = flow_sp - in.feed_flow_kg_s;
  const double raw = state.output_bias + g.kp_flow * e_flow + g.ki_flow * state.flow_integrator;
  const double cmd = std::clamp(raw, 0.0, 1.0);

  const bool high = raw >= 1.0;
  const bool low = raw <= 0.0;
  const double next_flow_int = state.flow_integrator + e_flow * dt_s;
  const double next_level_int = state.level_integrator + e_level * dt_s;
  if (!std::isfinite(next_flow_int) || !std::isfinite(next_level_int)) {
    throw ControlFault("controller integrator overflow");
  }
  if (!((high && e_flow > 0.0) || (low && e_flow < 0.0))) state.flow_integrator = next_flow_int;
  if (!((high && e_level > 0.0) || (low && e_level < 0.0))) state.level_integrator = next_level_int;
  return {cmd, flow_sp};
}

}  // namespace twinbed::plc
