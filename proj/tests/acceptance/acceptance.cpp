// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: twinbed_acceptance [criterion numbers...]

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "twinbed/attacks/scenario.hpp"
#include "twinbed/common/csv.hpp"
#include "twinbed/common/text.hpp"
#include "twinbed/detect/detect.hpp"
#include "twinbed/raddose/dose.hpp"
#include "twinbed/rlnav/agent.hpp"
#include "twinbed/tagbus/frame.hpp"
#include "twinbed/testbed/testbed.hpp"

namespace fs = std::filesystem;
using namespace twinbed;

namespace {

const fs::path kData = TWINBED_DATA_DIR;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// 1. Navigation policy on the reference map.
Verdict rl_navigation() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = KeyValueConfig::load(kData / "configs/rl_train.cfg");
  const auto tc = rlnav::train_config_from(cfg);
  rlnav::NavEnv env(rlnav::GridMap::load(kData / "maps/reference_20x20.map"), rlnav::env_config_from(cfg));
  if (env.map().width() != 20 || env.map().height() != 20 || env.config().zones != 3) {
    return {false, "reference map must be 20x20 with 3 zones"};
  }
  auto policy = rlnav::train(env, tc);
  const auto report = rlnav::evaluate(env, *policy, 50, true);
  const double rate = report.success_rate();
  const double secs = seconds_since(t0);
  const bool ok = tc.steps <= 200000 && rate >= 0.90 && secs <= 15 * 60;
  return {ok, "success " + fmt(rate) + " over 50 deterministic episodes after " + std::to_string(tc.steps) +
                  " steps in " + fmt(secs, 3) + " s"};
}

// 2. CW_TEMP false data reaches the twin.
Verdict fdi_propagation() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto script = attacks::load_scenario(kData / "scenarios/fdi_cw_temp.scn");
  const auto event_t = script.events.at(0).t_ms;
  attacks::ScenarioRunner runner(script);
  std::vector<std::pair<std::int64_t, double>> mirror;
  runner.bed().add_observer([&](const testbed::Testbed& bed) {
    const auto v = bed.twin().get("CW_TEMP");
    if (v.age_ms >= 0) mirror.emplace_back(bed.now(), v.value);
  });
  auto result = runner.run();

  bool nominal = false;
  double before = 0.0;
  std::optional<std::int64_t> switched;
  for (const auto& [t, v] : mirror) {
    if (t < event_t) {
      before = v;
      nominal = std::abs(v - 14.77) <= 0.1;
    } else if (!switched && v == 200.0) {
      switched = t;
    }
  }
  bool held = true;
  for (const auto& [t, v] : mirror) {
    if (switched && t >= *switched && v != 200.0) held = false;
  }
  const auto samples = result.bed->historian().store().query_range("CW_TEMP", 0, script.duration_ms);
  bool hist_before = false, hist_after = false;
  for (const auto& s : samples) {
    if (s.t_ms < event_t && std::abs(s.value - 14.77) <= 0.1) hist_before = true;
    if (s.t_ms >= event_t && s.value == 200.0) hist_after = true;
  }
  const double secs = seconds_since(t0);
  const auto latency = switched ? *switched - event_t : -1;
  const bool ok = nominal && switched && latency <= 2 * 250 && held && hist_before && hist_after && secs < 120;
  return {ok, "mirror " + fmt(before) + " -> 200 after " + std::to_string(latency) + " ms, historian step " +
                  (hist_before && hist_after ? "present" : "missing") + ", " + fmt(secs, 3) + " s"};
}

// 3. Dose field halving, zero out of range, table units, dosimeter integration.
Verdict dose_properties() {
  const auto src = raddose::RadiationSource::from_config(KeyValueConfig::load(kData / "dose/source.cfg"), kData / "dose");
  const auto c = src.center();
  const auto h = src.half_extent();
  const double L = src.halving_distance_m;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  double worst_halving = 0.0;
  for (int i = 0; i < 1000; ++i) {
    raddose::Vec3 u{n01(rng), n01(rng), n01(rng)};
    const double norm = std::sqrt(u.x * u.x + u.y * u.y + u.z * u.z);
    u = {u.x / norm, u.y / norm, u.z / norm};
    const double x0 = raddose::boundary_distance(h, u);
    auto at = [&](double d) { return raddose::Vec3{c.x + u.x * d, c.y + u.y * d, c.z + u.z * d}; };
    // Points just past the boundary so the mesh lookup cannot take over.
    const double d1 = x0 + 1e-9;
    if (d1 + L > src.max_range_m) continue;
    const auto e1 = raddose::evaluate_dose(src, at(d1));
    const auto e2 = raddose::evaluate_dose(src, at(d1 + L));
    const auto e0 = raddose::evaluate_dose(src, at(x0));
    if (e1.zone != raddose::Zone::Approx || e2.zone != raddose::Zone::Approx) return {false, "probe left the approximation zone"};
    const double rate_x0 = e0.approx_rate_sv_s;
    const double rate_x0_l = e2.rate_sv_s * std::exp2(1e-9 / L);
    if (rate_x0 <= 0.0) return {false, "zero boundary rate"};
    worst_halving = std::max(worst_halving, std::abs(rate_x0_l - 0.5 * rate_x0) / (0.5 * rate_x0));
  }
  const bool halving_ok = worst_halving <= 1e-12;

  const auto far = raddose::update_dose(src, {c.x + src.max_range_m + 1.0, c.y, c.z});
  const bool zero_ok = far == 0.0;

  const auto table = read_csv(kData / "dose/demo_table.csv");
  double worst_units = 0.0;
  for (const auto& row : table.rows) {
    const double sv_s = *parse_double(row.at(4));
    const double sv_hr = *parse_double(row.at(5));
    worst_units = std::max(worst_units, std::abs(sv_hr - 3600.0 * sv_s) / std::abs(3600.0 * sv_s));
  }
  const bool units_ok = worst_units <= 1e-9 && !table.rows.empty();

  // A walk through the field: approach, cross the mesh, leave.
  auto walk = [&](double dt) {
    raddose::Dosimeter d;
    const double duration = 30.0;
    const int steps = static_cast<int>(std::llround(duration / dt));
    for (int i = 0; i < steps; ++i) {
      const double t = i * dt;
      d.position = {c.x - 6.0 + 0.4 * t, c.y + 0.3 * std::sin(0.5 * t), c.z + 0.2};
      d = raddose::dosimeter_tick(d, src, dt);
    }
    return d.cumulative_dose_sv;
  };
  const double coarse = walk(0.1);
  const double fine = walk(0.001);
  const double rel = std::abs(coarse - fine) / fine;
  const bool path_ok = rel <= 0.02;

  std::ostringstream s;
  s << "halving err " << fmt(worst_halving) << ", far probe " << far << " Sv/s, table err " << fmt(worst_units)
    << " over " << table.rows.size() << " rows, dosimeter " << fmt(coarse) << " vs fine " << fmt(fine) << " Sv";
  return {halving_ok && zero_ok && units_ok && path_ok, s.str()};
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool same_bits(const plant::PlantState& a, const plant::PlantState& b) {
  return a.t_ms == b.t_ms && same_bits(a.sg_level_pct, b.sg_level_pct) && same_bits(a.w_fw_kg_s, b.w_fw_kg_s) &&
         same_bits(a.w_st_kg_s, b.w_st_kg_s) && same_bits(a.fw_valve_pos, b.fw_valve_pos) &&
         a.fw_pump_on == b.fw_pump_on && same_bits(a.fw_pump_speed, b.fw_pump_speed) &&
         same_bits(a.cw_temp_c, b.cw_temp_c) && same_bits(a.cw_temp_sensor_c, b.cw_temp_sensor_c) &&
         same_bits(a.sg_level_sensor_pct, b.sg_level_sensor_pct) && a.sim_status == b.sim_status &&
         a.control_owner == b.control_owner;
}

bool same_bits(const plc::ControllerState& a, const plc::ControllerState& b) {
  return same_bits(a.level_integrator, b.level_integrator) && same_bits(a.flow_integrator, b.flow_integrator) &&
         same_bits(a.output_bias, b.output_bias) && same_bits(a.gains.kp_level, b.gains.kp_level) &&
         same_bits(a.gains.ki_level, b.gains.ki_level) && same_bits(a.gains.kp_flow, b.gains.kp_flow) &&
         same_bits(a.gains.ki_flow, b.gains.ki_flow);
}

// 4. FREEZE holds the controller and the plant.
Verdict freeze_determinism() {
  testbed::Testbed bed(testbed::TestbedConfig::defaults());
  bed.run_until(20000);
  // Disturb first so the integrators are away from zero.
  bed.plant().inject_malfunction(plant::Malfunction{plant::MalfunctionKind::SteamStep, "", 0.0, 1.05});
  bed.run_until(40000);
  bed.plant().set_status(plant::SimStatus::Freeze);
  bed.run_until(bed.now() + 100);  // let the PLC see FREEZE

  const auto ctrl0 = bed.plc().controller();
  const auto cmd0 = bed.plc().valve_command();
  const auto plant0 = bed.plant().state();
  const auto scans0 = bed.plc().scan_count();
  bool ctrl_same = true, plant_same = true;
  std::set<std::uint64_t> plant_steps;
  while (bed.plc().scan_count() < scans0 + 1000) {
    bed.tick();
    ctrl_same = ctrl_same && same_bits(bed.plc().controller(), ctrl0) && same_bits(bed.plc().valve_command(), cmd0);
    plant_same = plant_same && same_bits(bed.plant().state(), plant0);
  }
  const auto scans = bed.plc().scan_count() - scans0;
  const auto frozen_steps = (bed.now() - 40100) / bed.config().plant.step_ms;

  // The pure step under FREEZE, K = 1..500 applications.
  const auto params = bed.config().plant;
  auto s = plant::nominal_state(params);
  s.sg_level_pct = 51.3;
  s.sim_status = plant::SimStatus::Freeze;
  const auto s0 = s;
  bool pure_same = true;
  for (int k = 0; k < 500; ++k) {
    s = plant::step(s, params, params.step_ms, plant::StepInputs{0.9, 1.2, 0.5, 0.5});
    pure_same = pure_same && same_bits(s, s0);
  }
  return {ctrl_same && plant_same && pure_same && scans == 1000,
          std::to_string(scans) + " frozen scans (controller " + (ctrl_same ? "identical" : "changed") + "), " +
              std::to_string(frozen_steps) + " frozen plant steps (" + (plant_same ? "identical" : "changed") +
              "), pure step x500 " + (pure_same ? "identical" : "changed")};
}

// 5. +10 % steam step under both control owners.
Verdict regulation() {
  std::ostringstream detail;
  bool all_ok = true;
  for (auto owner : {plant::ControlOwner::External, plant::ControlOwner::Internal}) {
    auto cfg = testbed::TestbedConfig::defaults();
    cfg.control_owner = owner;
    testbed::Testbed bed(cfg);
    double cmd_min = 1.0, cmd_max = 0.0, worst = 0.0;
    bed.add_observer([&](const testbed::Testbed& b) {
      const double cmd = b.plant().valve_command();
      cmd_min = std::min(cmd_min, cmd);
      cmd_max = std::max(cmd_max, cmd);
      if (owner == plant::ControlOwner::External) {
        cmd_min = std::min(cmd_min, b.plc().valve_command());
        cmd_max = std::max(cmd_max, b.plc().valve_command());
      }
      worst = std::max(worst, std::abs(b.plant().state().sg_level_pct - cfg.plant.level_setpoint_pct));
    });
    bed.run_until(100000);
    bed.plant().inject_malfunction(plant::Malfunction{plant::MalfunctionKind::SteamStep, "", 0.0, 1.10});
    bed.run_until(400000);
    const double sp = cfg.plant.level_setpoint_pct;
    const double err = std::abs(bed.plant().state().sg_level_pct - sp);
    const bool ok = err <= 0.01 * sp && cmd_min >= 0.0 && cmd_max <= 1.0;
    all_ok = all_ok && ok;
    if (!detail.str().empty()) detail << "; ";
    detail << plant::to_string(owner) << ": |level - sp| " << fmt(err) << " at 400 s (peak " << fmt(worst)
           << "), cmd in [" << fmt(cmd_min) << ", " << fmt(cmd_max) << "]";
  }
  return {all_ok, detail.str()};
}

// 6. 1 Hz implant: level stays close, the valve command shows the tone.
Verdict oscillation_stealth() {
  const auto script = attacks::load_scenario(kData / "scenarios/implant_oscillation.scn");
  const auto on = std::find_if(script.events.begin(), script.events.end(),
                               [](const auto& e) { return e.action == attacks::Action::ImplantOn; });
  const auto off = std::find_if(script.events.begin(), script.events.end(),
                                [](const auto& e) { return e.action == attacks::Action::ImplantOff; });
  if (on == script.events.end() || off == script.events.end()) return {false, "scenario lacks IMPLANT_ON/OFF"};
  if (on->number("amplitude") != 0.02 || on->number("freq_hz") != 1.0 || off->t_ms - on->t_ms != 120000) {
    return {false, "scenario must run A=0.02, f=1 Hz for 120 s"};
  }
  attacks::ScenarioRunner runner(script);
  double worst_level = 0.0;
  const double sp = runner.bed().config().plant.level_setpoint_pct;
  runner.bed().add_observer([&](const testbed::Testbed& b) {
    worst_level = std::max(worst_level, std::abs(b.plant().state().sg_level_pct - sp));
  });
  auto result = runner.run();
  const auto& store = result.bed->historian().store();
  detect::DetectorConfig dc;

  const auto level = detect::series_from_samples("SG_LEVEL", store.query_range("SG_LEVEL", 0, script.duration_ms));
  const auto steps = detect::zscore_detect(level, dc);

  const auto cmd = detect::series_from_samples("FW_VALVE_CMD", store.query_range("FW_VALVE_CMD", 0, script.duration_ms));
  const auto osc = detect::spectral_detect(cmd, dc);
  // Frequency is asserted on windows that lie wholly inside the implant;
  // windows straddling the onset or the end mix two regimes.
  const auto span_ms = static_cast<std::int64_t>(dc.spectral_window - 1) * 10;
  int in_band = 0, during = 0, straddling = 0;
  double freq = 0.0;
  for (const auto& d : osc) {
    const auto start = d.t_ms - span_ms;
    if (start >= on->t_ms && d.t_ms <= off->t_ms) {
      ++during;
      if (std::abs(d.frequency_hz - 1.0) <= 0.1) {
        ++in_band;
        freq = d.frequency_hz;
      }
    } else if (d.t_ms >= on->t_ms && start <= off->t_ms) {
      ++straddling;
    }
  }
  const auto outside = static_cast<int>(osc.size()) - during - straddling;
  const bool ok = worst_level <= 0.05 * sp && steps.empty() && in_band > 0 && in_band == during;
  return {ok, "max |level - sp| " + fmt(worst_level) + ", " + std::to_string(steps.size()) +
                  " level step detections, " + std::to_string(in_band) + "/" + std::to_string(during) +
                  " in-implant oscillation detections at 1.0 +- 0.1 Hz (last " + fmt(freq) + " Hz), " +
                  std::to_string(straddling) + " at the edges, " + std::to_string(outside) + " outside"};
}

// 7. Detector batch over seeded runs, spectral false positives on noise.
Verdict detector_batch() {
  detect::DetectorConfig dc;
  const auto fdi = attacks::load_scenario(kData / "scenarios/fdi_cw_temp.scn");
  const auto benign = attacks::load_scenario(kData / "scenarios/benign.scn");
  std::vector<detect::RunOutcome> runs;
  std::int64_t grace_ms = 0;
  for (const auto* base : {&fdi, &benign}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto script = *base;
      script.seed = seed;
      auto result = attacks::run_scenario(script);
      const auto& hist = result.bed->historian();
      detect::RunOutcome run;
      run.labels = result.labels;
      for (const auto& e : hist.manifest()) {
        grace_ms = std::max(grace_ms, dc.window * e.period_ms);
        auto s = detect::series_from_samples(e.tag, hist.store().query_range(e.tag, 0, script.duration_ms));
        auto d = detect::zscore_detect(s, dc);
        run.detections.insert(run.detections.end(), d.begin(), d.end());
      }
      runs.push_back(std::move(run));
    }
  }
  const auto m = detect::evaluate(runs, grace_ms);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  int false_pos = 0;
  for (int w = 0; w < 100; ++w) {
    detect::Series s{"NOISE", {}, {}};
    for (int i = 0; i < dc.spectral_window; ++i) {
      s.t_ms.push_back(i * 10);
      s.values.push_back(n01(rng));
    }
    if (!detect::spectral_detect(s, dc).empty()) ++false_pos;
  }
  const bool ok = m.detection_rate == 1.0 && m.false_alarm_rate == 0.0 && m.attack_intervals == 10 && false_pos < 1;
  return {ok, "detection_rate " + fmt(m.detection_rate) + " (" + std::to_string(m.detected_intervals) + "/" +
                  std::to_string(m.attack_intervals) + "), false_alarm_rate " + fmt(m.false_alarm_rate) + " (" +
                  std::to_string(m.false_detections) + "/" + std::to_string(m.detections) +
                  "), spectral false positives " + std::to_string(false_pos) + "/100"};
}

tagbus::Value random_value(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 3);
  switch (kind(rng)) {
    case 0: {
      double d;
      do {
        d = std::bit_cast<double>(rng());
      } while (!std::isfinite(d));
      return d;
    }
    case 1: return static_cast<std::int64_t>(rng());
    case 2: return (rng() & 1) != 0;
    default: {
      // Whole code points only, so the text stays valid UTF-8.
      static const std::vector<std::string> pool = {"a", "b", "X", "Z", "0", "9", " ", "_", "-", "\"", "\\", "/",
                                                    "\n", "\t", "{", "}", "[", "]", ":", ",", "\xc3\xa9", "\xe2\x82\xac"};
      std::string s;
      const auto n = rng() % 24;
      for (std::size_t i = 0; i < n; ++i) s += pool[rng() % pool.size()];
      return s;
    }
  }
}

std::string random_name(std::mt19937_64& rng) {
  static const std::string pool = "ABCDEFGHIJKLMNOPQRSTUVWXYZ_0123456789.";
  std::string s;
  const auto n = 1 + rng() % 16;
  for (std::size_t i = 0; i < n; ++i) s += pool[rng() % pool.size()];
  return s;
}

tagbus::Message random_message(std::mt19937_64& rng) {
  tagbus::Message m;
  m.id = rng();
  m.op = static_cast<tagbus::Op>(rng() % 4);
  m.is_reply = (rng() & 1) != 0;
  const auto n = rng() % 6;
  auto tag = [&] {
    static const tagbus::Quality qs[] = {tagbus::Quality::Good, tagbus::Quality::Stale, tagbus::Quality::Forced};
    return tagbus::make_tag(random_name(rng), random_value(rng), static_cast<std::int64_t>(rng()), qs[rng() % 3]);
  };
  if (m.is_reply) {
    for (std::size_t i = 0; i < n; ++i) {
      auto t = tag();
      m.reply[t.name] = t;
    }
    m.ok = (rng() & 1) != 0;
    if (!m.ok) m.error = "rejected: " + random_name(rng);
  } else if (m.op == tagbus::Op::Write) {
    for (std::size_t i = 0; i < n; ++i) {
      auto t = tag();
      m.writes[t.name] = t;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) m.tags.push_back(random_name(rng));
  }
  return m;
}

// 8. Codec round trips and hostile input.
Verdict protocol_soundness() {
  std::mt19937_64 rng(8);
  int mismatches = 0, crashes = 0, rejected = 0;
  std::vector<tagbus::Bytes> corpus;
  for (int i = 0; i < 10000; ++i) {
    const auto m = random_message(rng);
    try {
      const auto bytes = tagbus::encode_frame(m);
      const auto back = tagbus::decode_frame(bytes);
      if (!(back.message == m) || back.consumed != bytes.size()) ++mismatches;
      if (corpus.size() < 256) corpus.push_back(bytes);
    } catch (const std::exception&) {
      ++mismatches;
    }
  }
  auto try_decode = [&](const tagbus::Bytes& b) {
    try {
      (void)tagbus::decode_frame(b);
    } catch (const tagbus::ProtocolError&) {
      ++rejected;
    } catch (...) {
      ++crashes;
    }
  };
  for (int i = 0; i < 10000; ++i) {
    tagbus::Bytes b;
    if (i % 2 == 0) {
      // Arbitrary bytes, sometimes behind a plausible length header.
      const auto n = rng() % 64;
      for (std::size_t k = 0; k < n; ++k) b.push_back(static_cast<std::uint8_t>(rng()));
      if (i % 4 == 0) {
        const auto len = static_cast<std::uint32_t>(b.size());
        b.insert(b.begin(), {static_cast<std::uint8_t>(len >> 24), static_cast<std::uint8_t>(len >> 16),
                             static_cast<std::uint8_t>(len >> 8), static_cast<std::uint8_t>(len)});
      }
    } else {
      // Mutated valid frames: flipped, inserted and deleted bytes, truncation.
      b = corpus[rng() % corpus.size()];
      const auto edits = 1 + rng() % 4;
      for (std::size_t e = 0; e < edits && !b.empty(); ++e) {
        const auto pos = rng() % b.size();
        switch (rng() % 4) {
          case 0: b[pos] ^= static_cast<std::uint8_t>(1u << (rng() % 8)); break;
          case 1: b.insert(b.begin() + static_cast<std::ptrdiff_t>(pos), static_cast<std::uint8_t>(rng())); break;
          case 2: b.erase(b.begin() + static_cast<std::ptrdiff_t>(pos)); break;
          default: b.resize(pos); break;
        }
      }
    }
    try_decode(b);
  }
  return {mismatches == 0 && crashes == 0, "10000 round trips, " + std::to_string(mismatches) + " mismatches; 10000 hostile inputs, " +
                                               std::to_string(crashes) + " crashes, " + std::to_string(rejected) +
                                               " rejected"};
}

// 9. Discounted shaping sums telescope.
Verdict shaping_telescoping() {
  rlnav::EnvConfig ec;
  ec.zones = 0;
  rlnav::NavEnv env(rlnav::GridMap::load(kData / "maps/reference_20x20.map"), ec);
  const double gamma = ec.rewards.gamma;
  std::mt19937_64 rng(9);
  double worst = 0.0;
  int trajectories = 0;
  while (trajectories < 1000) {
    env.reset(rng());
    const auto s0 = env.position();
    const int length = 1 + static_cast<int>(rng() % 300);
    double sum = 0.0, discount = 1.0;
    int t = 0;
    for (; t < length; ++t) {
      // Random non-terminal moves only.
      std::vector<rlnav::Action> moves;
      for (int a = 0; a < rlnav::kActionCount; ++a) {
        const auto next = rlnav::apply(env.position(), static_cast<rlnav::Action>(a));
        if (!env.collidable(next) && next != env.map().goal()) moves.push_back(static_cast<rlnav::Action>(a));
      }
      if (moves.empty() || env.steps() + 1 >= ec.rewards.max_steps) break;
      const auto r = env.step(moves[rng() % moves.size()]);
      sum += discount * r.reward;
      discount *= gamma;
    }
    if (t == 0) continue;
    const double expected = std::pow(gamma, t) * env.phi(env.position()) - env.phi(s0);
    worst = std::max(worst, std::abs(sum - expected));
    ++trajectories;
  }
  return {worst <= 1e-9, "1000 trajectories, max |sum - (g^T phi(s_T) - phi(s_0))| = " + fmt(worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"rl navigation", rl_navigation},
      {"fdi propagation", fdi_propagation},
      {"dose field properties", dose_properties},
      {"freeze determinism", freeze_determinism},
      {"three-element regulation", regulation},
      {"oscillation stealth", oscillation_stealth},
      {"detector batch", detector_batch},
      {"protocol soundness", protocol_soundness},
      {"shaping telescoping", shaping_telescoping},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(n)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s %d %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", n, criteria[i].first.c_str(), v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
