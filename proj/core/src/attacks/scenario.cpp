#include "twinbed/attacks/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "twinbed/common/log.hpp"
#include "twinbed/common/text.hpp"

namespace twinbed::attacks {

using nlohmann::json;
using testbed::LinkId;

namespace {
struct ActionName {
  Action action;
  const char* name;
};
constexpr ActionName kActions[] = {
    {Action::FdiWrite, "FDI_WRITE"},       {Action::MitmStart, "MITM_START"},
    {Action::MitmStop, "MITM_STOP"},       {Action::DosStart, "DOS_START"},
    {Action::DosStop, "DOS_STOP"},         {Action::ReplayRecord, "REPLAY_RECORD"},
    {Action::ReplayPlay, "REPLAY_PLAY"},   {Action::ReplayStop, "REPLAY_STOP"},
    {Action::ImplantOn, "IMPLANT_ON"},     {Action::ImplantOff, "IMPLANT_OFF"},
    {Action::Malfunction, "MALFUNCTION"},  {Action::MalfunctionClear, "MALFUNCTION_CLEAR"},
    {Action::SetStatus, "SET_STATUS"},     {Action::SetOwner, "SET_OWNER"},
};

struct Schema {
  std::set<std::string> required;
  std::set<std::string> optional;
};

const Schema& schema_for(Action a) {
  static const std::map<Action, Schema> schemas = {
      {Action::FdiWrite, {{"tag", "value"}, {"route", "duration_ms", "link"}}},
      {Action::MitmStart, {{"link"}, {"rules"}}},
      {Action::MitmStop, {{"link"}, {}}},
      {Action::DosStart, {{"link"}, {"drop_prob", "delay_ms"}}},
      {Action::DosStop, {{"link"}, {}}},
      {Action::ReplayRecord, {{"link", "duration_ms"}, {}}},
      {Action::ReplayPlay, {{"link"}, {"duration_ms"}}},
      {Action::ReplayStop, {{"link"}, {}}},
      {Action::ImplantOn, {{"amplitude", "freq_hz"}, {"target"}}},
      {Action::ImplantOff, {{}, {}}},
      {Action::Malfunction, {{"kind"}, {"tag", "value", "factor", "percent"}}},
      {Action::MalfunctionClear, {{}, {}}},
      {Action::SetStatus, {{"status"}, {}}},
      {Action::SetOwner, {{"owner"}, {}}},
  };
  return schemas.at(a);
}

const std::set<std::string>& numeric_params() {
  static const std::set<std::string> keys = {"value",    "duration_ms", "drop_prob", "delay_ms",
                                             "amplitude", "freq_hz",     "factor",    "percent"};
  return keys;
}

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return format_double(v.get<double>());
  throw ScenarioError("parameter values must be scalars");
}

MitmRule parse_rule(const json& j) {
  if (!j.is_object()) throw ScenarioError("rule must be an object");
  MitmRule r;
  if (j.contains("match")) {
    const auto& m = j.at("match");
    if (m.contains("tag")) r.tag_pattern = m.at("tag").get<std::string>();
    if (m.contains("op")) {
      auto op = tagbus::op_from_string(m.at("op").get<std::string>());
      if (!op) throw ScenarioError("rule op must be READ, WRITE, STATUS or SUBSCRIBE_POLL");
      r.op = *op;
    }
  }
  if (!j.contains("transform") || !j.at("transform").is_object() || j.at("transform").size() != 1) {
    throw ScenarioError("rule needs exactly one transform");
  }
  const auto& [kind, value] = *j.at("transform").items().begin();
  if (!value.is_number()) throw ScenarioError("transform value must be a number");
  r.transform.value = value.get<double>();
  if (kind == "set_value") {
    r.transform.kind = MitmTransform::Kind::SetValue;
  } else if (kind == "scale") {
    r.transform.kind = MitmTransform::Kind::Scale;
  } else if (kind == "delay_ms") {
    r.transform.kind = MitmTransform::Kind::DelayMs;
  } else if (kind == "drop_prob") {
    r.transform.kind = MitmTransform::Kind::DropProb;
  } else {
    throw ScenarioError("unknown transform " + kind);
  }
  try {
    r.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }
  return r;
}

std::string describe(const Event& e) {
  std::string out;
  for (const auto& [k, v] : e.params) {
    if (k == "link" || k == "tag") continue;
    if (!out.empty()) out += ' ';
    out += k + '=' + v;
  }
  if (!e.rules.empty()) out += (out.empty() ? "" : " ") + std::string("rules=") + std::to_string(e.rules.size());
  return out;
}
}  // namespace

std::string_view to_string(Action a) {
  for (const auto& n : kActions) {
    if (n.action == a) return n.name;
  }
  return "?";
}

std::optional<Action> action_from_string(std::string_view s) {
  for (const auto& n : kActions) {
    if (s == n.name) return n.action;
  }
  return std::nullopt;
}

std::string_view to_string(FdiRoute r) {
  switch (r) {
    case FdiRoute::PlantOverride:
      return "PLANT_OVERRIDE";
    case FdiRoute::PlcWrite:
      return "PLC_WRITE";
    case FdiRoute::MitmRewrite:
      return "MITM_REWRITE";
  }
  return "?";
}

std::optional<FdiRoute> fdi_route_from_string(std::string_view s) {
  if (s == "PLANT_OVERRIDE") return FdiRoute::PlantOverride;
  if (s == "PLC_WRITE") return FdiRoute::PlcWrite;
  if (s == "MITM_REWRITE") return FdiRoute::MitmRewrite;
  return std::nullopt;
}

std::string Event::param(const std::string& key, const std::string& fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::optional<double> Event::number_opt(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) return std::nullopt;
  return parse_double(it->second);
}

double Event::number(const std::string& key) const {
  auto v = number_opt(key);
  if (!v) throw ScenarioError("missing numeric parameter " + key);
  return *v;
}

ScenarioScript parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ScenarioError("scenario must be a JSON object");
  ScenarioScript s;
  try {
    s.name = doc.value("name", std::string("unnamed"));
    s.epoch_ms = doc.value("epoch_ms", std::int64_t{0});
    s.duration_ms = doc.at("duration_ms").get<std::int64_t>();
    s.seed = doc.value("seed", std::uint64_t{1});
    s.control_owner = doc.value("control_owner", std::string("EXTERNAL"));
    if (doc.contains("sample_periods_ms")) {
      for (const auto& [tag, p] : doc.at("sample_periods_ms").items()) s.sample_periods_ms[tag] = p.get<std::int64_t>();
    }
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("scenario header: ") + e.what());
  }
  if (s.duration_ms <= 0) throw ScenarioError("duration_ms must be positive");
  if (!plant::control_owner_from_string(s.control_owner)) throw ScenarioError("control_owner must be INTERNAL or EXTERNAL");
  for (const auto& [tag, p] : s.sample_periods_ms) {
    if (p < 10) throw ScenarioError("sample period for " + tag + " must be >= 10 ms");
  }

  const json events = doc.value("events", json::array());
  if (!events.is_array()) throw ScenarioError("events must be an array");
  std::int64_t last_t = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto where = "event " + std::to_string(i) + ": ";
    const auto& je = events[i];
    if (!je.is_object()) throw ScenarioError(where + "must be an object");
    Event e;
    try {
      e.t_ms = je.at("t_ms").get<std::int64_t>();
      auto action = action_from_string(je.at("action").get<std::string>());
      if (!action) throw ScenarioError(where + "unknown action " + je.at("action").get<std::string>());
      e.action = *action;
    } catch (const json::exception& ex) {
      throw ScenarioError(where + ex.what());
    }
    if (e.t_ms < 0 || e.t_ms < last_t) throw ScenarioError(where + "event times must be non-negative and non-decreasing");
    last_t = e.t_ms;

    const auto& schema = schema_for(e.action);
    const json params = je.value("params", json::object());
    if (!params.is_object()) throw ScenarioError(where + "params must be an object");
    for (const auto& [k, v] : params.items()) {
      if (!schema.required.count(k) && !schema.optional.count(k)) {
        throw ScenarioError(where + "unexpected parameter " + k + " for " + std::string(to_string(e.action)));
      }
      try {
        if (k == "rules") {
          if (!v.is_array()) throw ScenarioError("rules must be an array");
          for (const auto& r : v) e.rules.push_back(parse_rule(r));
          continue;
        }
        if (numeric_params().count(k) && !v.is_number()) throw ScenarioError(k + " must be a number");
        e.params[k] = scalar_text(v);
      } catch (const ScenarioError& ex) {
        throw ScenarioError(where + ex.what());
      }
    }
    for (const auto& k : schema.required) {
      if (!params.contains(k)) throw ScenarioError(where + "missing parameter " + k);
    }
    try {
      if (e.params.count("link")) testbed::link_from_string(e.params["link"]);
    } catch (const std::invalid_argument& ex) {
      throw ScenarioError(where + ex.what());
    }
    if (e.action == Action::FdiWrite && e.params.count("route") && !fdi_route_from_string(e.params["route"])) {
      throw ScenarioError(where + "route must be PLANT_OVERRIDE, PLC_WRITE or MITM_REWRITE");
    }
    if (e.action == Action::SetStatus && !plant::sim_status_from_string(e.params["status"])) {
      throw ScenarioError(where + "status must be RUN, FREEZE or RESET");
    }
    if (e.action == Action::SetOwner && !plant::control_owner_from_string(e.params["owner"])) {
      throw ScenarioError(where + "owner must be INTERNAL or EXTERNAL");
    }
    if (e.action == Action::ImplantOn) {
      plc::LogicImplant imp{e.number("amplitude"), e.number("freq_hz"), plc::ImplantTarget::ActuatorOut, true};
      const auto target = e.param("target", "ACTUATOR_OUT");
      if (target != "ACTUATOR_OUT" && target != "SENSOR_IN") {
        throw ScenarioError(where + "target must be ACTUATOR_OUT or SENSOR_IN");
      }
      try {
        imp.validate();
      } catch (const std::invalid_argument& ex) {
        throw ScenarioError(where + ex.what());
      }
    }
    if (e.action == Action::Malfunction) {
      try {
        plant::malfunction_kind_from_string(e.params["kind"]);
      } catch (const plant::UnknownMalfunction& ex) {
        throw ScenarioError(where + ex.what());
      }
    }
    if (auto d = e.number_opt("duration_ms"); d && *d <= 0) throw ScenarioError(where + "duration_ms must be positive");
    if (auto p = e.number_opt("drop_prob"); p && !(*p >= 0.0 && *p <= 1.0)) {
      throw ScenarioError(where + "drop_prob must lie in [0, 1]");
    }
    if (auto d = e.number_opt("delay_ms"); d && *d < 0) throw ScenarioError(where + "delay_ms must be >= 0");
    s.events.push_back(std::move(e));
  }
  return s;
}

ScenarioScript load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_scenario(text);
}

testbed::TestbedConfig testbed_config_for(const ScenarioScript& script, testbed::TestbedConfig base) {
  base.plant.seed = script.seed;
  base.control_owner = *plant::control_owner_from_string(script.control_owner);
  for (const auto& [tag, period] : script.sample_periods_ms) {
    auto it = std::find_if(base.historian_manifest.begin(), base.historian_manifest.end(),
                           [&](const auto& e) { return e.tag == tag; });
    if (it == base.historian_manifest.end()) {
      base.historian_manifest.push_back({tag, historian::Source::Plc, period});
    } else {
      it->period_ms = period;
    }
  }
  return base;
}

ScenarioRunner::ScenarioRunner(const ScenarioScript& script, testbed::TestbedConfig base)
    : script_(script),
      bed_(std::make_unique<testbed::Testbed>(testbed_config_for(script, std::move(base)))),
      operator_plant_(bed_->link(LinkId::OperatorToPlant)),
      operator_plc_(bed_->link(LinkId::OperatorToPlc)) {}

Interposer& ScenarioRunner::interposer(LinkId link) {
  auto& slot = interposers_[link];
  if (!slot) {
    const auto seed = script_.seed * 1000003ULL + static_cast<std::uint64_t>(link);
    slot = std::make_unique<Interposer>(seed, [this] { return bed_->now(); });
    bed_->link(link).set_tap(slot.get());
  }
  return *slot;
}

void ScenarioRunner::fdi_write(const std::string& tag, double value, FdiRoute route, LinkId mitm_link) {
  const auto now = bed_->now();
  switch (route) {
    case FdiRoute::PlantOverride:
      try {
        operator_plant_.write_tag(tagbus::make_tag(tag, value, now, tagbus::Quality::Forced));
      } catch (const std::exception& e) {
        throw AttackFailed(std::string("plant rejected the write: ") + e.what());
      }
      break;
    case FdiRoute::PlcWrite:
      try {
        operator_plc_.write_tag(tagbus::make_tag(tag, value, now, tagbus::Quality::Forced));
      } catch (const std::exception& e) {
        throw AttackFailed(std::string("PLC rejected the write: ") + e.what());
      }
      break;
    case FdiRoute::MitmRewrite: {
      auto it = interposers_.find(mitm_link);
      if (it == interposers_.end() || !it->second->mitm_active()) {
        throw AttackFailed("no active MITM on " + std::string(testbed::to_string(mitm_link)));
      }
      it->second->add_rule({tag, tagbus::Op::Read, {MitmTransform::Kind::SetValue, value}});
      break;
    }
  }
}

void ScenarioRunner::open_interval(const std::string& key, const std::string& source,
                                   std::optional<std::int64_t> end_ms) {
  if (open_.count(key)) return;
  open_[key] = {bed_->now(), end_ms, source};
}

void ScenarioRunner::close_interval(const std::string& key) {
  auto it = open_.find(key);
  if (it == open_.end()) return;
  attack_intervals_.push_back({it->second.start_ms, bed_->now(), true, it->second.source});
  open_.erase(it);
}

void ScenarioRunner::close_expired() {
  const auto now = bed_->now();
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->at_ms <= now) {
      auto fn = std::move(it->fn);
      it = pending_.erase(it);
      fn();
    } else {
      ++it;
    }
  }
  for (auto it = open_.begin(); it != open_.end();) {
    if (it->second.end_ms && *it->second.end_ms <= now) {
      attack_intervals_.push_back({it->second.start_ms, *it->second.end_ms, true, it->second.source});
      it = open_.erase(it);
    } else {
      ++it;
    }
  }
}

void ScenarioRunner::fire(const Event& e) {
  const auto now = bed_->now();
  const std::string action(to_string(e.action));
  LogEntry entry{now, action, e.param("tag", e.param("link")), true, describe(e)};
  auto link = [&] { return testbed::link_from_string(e.param("link", "plc-plant")); };
  auto end_of = [&](std::optional<double> dur) -> std::optional<std::int64_t> {
    if (!dur) return std::nullopt;
    return now + static_cast<std::int64_t>(*dur);
  };
  try {
    switch (e.action) {
      case Action::FdiWrite: {
        const auto route = fdi_route_from_string(e.param("route", "PLANT_OVERRIDE")).value();
        const auto tag = e.param("tag");
        const double value = e.number("value");
        fdi_write(tag, value, route, link());
        const auto end = end_of(e.number_opt("duration_ms"));
        open_interval("FDI:" + tag + ":" + std::to_string(now), "FDI_WRITE", end);
        if (end) {
          const auto l = link();
          pending_.push_back({*end, [this, tag, value, route, l] {
                                if (route == FdiRoute::PlantOverride) bed_->plant().clear_sensor_override(tag);
                                if (route == FdiRoute::MitmRewrite) {
                                  interposer(l).remove_rule(
                                      {tag, tagbus::Op::Read, {MitmTransform::Kind::SetValue, value}});
                                }
                              }});
        }
        break;
      }
      case Action::MitmStart:
        interposer(link()).start_mitm(e.rules);
        open_interval("MITM:" + e.param("link"), "MITM", std::nullopt);
        break;
      case Action::MitmStop:
        interposer(link()).stop_mitm();
        close_interval("MITM:" + e.param("link"));
        break;
      case Action::DosStart:
        interposer(link()).start_dos(e.number_opt("drop_prob").value_or(0.0),
                                     static_cast<std::int64_t>(e.number_opt("delay_ms").value_or(0.0)));
        open_interval("DOS:" + e.param("link"), "DOS", std::nullopt);
        break;
      case Action::DosStop:
        interposer(link()).stop_dos();
        close_interval("DOS:" + e.param("link"));
        break;
      case Action::ReplayRecord:
        interposer(link()).start_record(static_cast<std::int64_t>(e.number("duration_ms")));
        break;
      case Action::ReplayPlay: {
        auto& ip = interposer(link());
        ip.start_play();
        const auto end = end_of(e.number_opt("duration_ms"));
        open_interval("REPLAY:" + e.param("link"), "REPLAY", end);
        if (end) pending_.push_back({*end, [&ip] { ip.stop_play(); }});
        break;
      }
      case Action::ReplayStop:
        interposer(link()).stop_play();
        close_interval("REPLAY:" + e.param("link"));
        break;
      case Action::ImplantOn: {
        const auto target =
            e.param("target", "ACTUATOR_OUT") == "SENSOR_IN" ? plc::ImplantTarget::SensorIn : plc::ImplantTarget::ActuatorOut;
        bed_->plc().set_implant({e.number("amplitude"), e.number("freq_hz"), target, true});
        open_interval("IMPLANT", "IMPLANT", std::nullopt);
        break;
      }
      case Action::ImplantOff: {
        auto imp = bed_->plc().implant();
        imp.active = false;
        bed_->plc().set_implant(imp);
        close_interval("IMPLANT");
        break;
      }
      case Action::Malfunction: {
        std::map<std::string, std::string> params = e.params;
        const auto kind = params["kind"];
        params.erase("kind");
        bed_->plant().inject_malfunction(kind, params);
        entry.target = kind;
        break;
      }
      case Action::MalfunctionClear:
        bed_->plant().clear_malfunctions();
        break;
      case Action::SetStatus:
        bed_->plant().set_status(*plant::sim_status_from_string(e.param("status")));
        entry.target = e.param("status");
        break;
      case Action::SetOwner:
        bed_->plant().set_control_owner(*plant::control_owner_from_string(e.param("owner")));
        entry.target = e.param("owner");
        break;
    }
  } catch (const std::exception& ex) {
    entry.ok = false;
    entry.detail = ex.what();
    log::warn("scenario", action + " at t=" + std::to_string(now) + " ms FAILED: " + ex.what());
  }
  log_.push_back(std::move(entry));
}

ScenarioResult ScenarioRunner::run() {
  log_.push_back({bed_->now(), "START", script_.name, true, "seed=" + std::to_string(script_.seed)});
  std::size_t next = 0;
  while (bed_->now() < script_.duration_ms) {
    close_expired();
    while (next < script_.events.size() && script_.events[next].t_ms <= bed_->now()) fire(script_.events[next++]);
    bed_->tick();
  }
  close_expired();
  for (; next < script_.events.size(); ++next) {
    log_.push_back({script_.events[next].t_ms, std::string(to_string(script_.events[next].action)), "", false,
                    "scheduled after the end of the run"});
  }
  for (const auto& [key, iv] : open_) {
    attack_intervals_.push_back({iv.start_ms, script_.duration_ms, true, iv.source});
  }
  open_.clear();
  log_.push_back({bed_->now(), "STOP", script_.name, true, ""});

  ScenarioResult r;
  r.log = log_;
  r.labels = ground_truth(attack_intervals_, script_.duration_ms);
  r.bed = std::move(bed_);
  return r;
}

ScenarioResult run_scenario(const ScenarioScript& script, testbed::TestbedConfig base) {
  ScenarioRunner runner(script, std::move(base));
  return runner.run();
}

std::vector<LabeledInterval> ground_truth(std::vector<LabeledInterval> attacks, std::int64_t duration_ms) {
  std::sort(attacks.begin(), attacks.end(),
            [](const auto& a, const auto& b) { return a.start_ms < b.start_ms; });
  std::vector<LabeledInterval> merged;
  for (auto iv : attacks) {
    iv.start_ms = std::clamp<std::int64_t>(iv.start_ms, 0, duration_ms);
    iv.end_ms = std::clamp<std::int64_t>(iv.end_ms, 0, duration_ms);
    if (iv.end_ms <= iv.start_ms) continue;
    if (!merged.empty() && iv.start_ms <= merged.back().end_ms) {
      auto& m = merged.back();
      m.end_ms = std::max(m.end_ms, iv.end_ms);
      if (("+" + m.source + "+").find("+" + iv.source + "+") == std::string::npos) m.source += "+" + iv.source;
    } else {
      merged.push_back(iv);
    }
  }
  std::vector<LabeledInterval> out;
  std::int64_t cursor = 0;
  for (const auto& m : merged) {
    if (m.start_ms > cursor) out.push_back({cursor, m.start_ms, false, "benign"});
    out.push_back(m);
    cursor = m.end_ms;
  }
  if (cursor < duration_ms) out.push_back({cursor, duration_ms, false, "benign"});
  return out;
}

void write_run_log_csv(const std::vector<LogEntry>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t_ms,action,target,outcome,detail\n";
  for (const auto& e : log) {
    std::string detail = e.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    std::replace(detail.begin(), detail.end(), '\n', ' ');
    out << e.t_ms << ',' << e.action << ',' << e.target << ',' << (e.ok ? "OK" : "FAILED") << ',' << detail << '\n';
  }
}

}  // namespace twinbed::attacks
