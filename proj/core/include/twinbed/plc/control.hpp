#pragma once

#include <stdexcept>

namespace twinbed::plc {

class ControlFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ControllerGains {
  double kp_level = 0.05;  // kg/s per % level error
  double ki_level = 0.005;
  double kp_flow = 0.01;  // valve fraction per kg/s flow error
  double ki_flow = 0.05;

  bool operator==(const ControllerGains&) const = default;
};

// Cascade PI state. `output_bias` is the valve position the loop produces
// with zero error and empty integrators (the nominal operating point).
struct ControllerState {
  double level_integrator = 0.0;
  double flow_integrator = 0.0;
  ControllerGains gains;
  double output_bias = 0.5;

  bool operator==(const ControllerState&) const = default;
};

struct ThreeElementInputs {
  double level_pct;
  double level_setpoint_pct;
  double feed_flow_kg_s;
  double steam_flow_kg_s;
};

struct ThreeElementOutput {
  double valve_cmd;       // clamped to [0, 1]
  double flow_setpoint;   // kg/s
};

// One execution of the three-element level law:
//   flow_sp   = w_st + kp_level*e_L + ki_level*int(e_L)
//   valve_cmd = clamp(bias + kp_flow*e_F + ki_flow*int(e_F), 0, 1)
// with e_L = sp - level and e_F = flow_sp - w_fw. Integrators advance after
// the output is formed and are frozen while the output is saturated in the
// direction the error would push it. Non-finite inputs throw ControlFault and
// leave `state` untouched.
ThreeElementOutput three_element_control(const ThreeElementInputs& in, ControllerState& state, double dt_s);

}  // namespace twinbed::plc
