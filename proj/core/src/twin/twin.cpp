#include "twinbed/twin/twin.hpp"

#include <algorithm>
#include <mutex>

#include "twinbed/common/log.hpp"
#include "twinbed/plant/plant.hpp"

namespace twinbed::twin {

std::string_view to_string(Freshness f) { return f == Freshness::Fresh ? "FRESH" : "STALE"; }
std::string_view to_string(ComponentKind k) { return k == ComponentKind::Thermal ? "THERMAL" : "PUMP_OR_VALVE"; }
std::string_view to_string(OnOff c) {
  return c == OnOff::RedRunningOpen ? "RED_RUNNING_OPEN" : "GREEN_SECURED_SHUT";
}

std::optional<ComponentKind> component_kind_from_string(std::string_view s) {
  if (s == "THERMAL") return ComponentKind::Thermal;
  if (s == "PUMP_OR_VALVE") return ComponentKind::PumpOrValve;
  return std::nullopt;
}

TwinConfig TwinConfig::defaults() {
  namespace pt = plant::tags;
  TwinConfig c;
  c.kinds[pt::kCwTemp] = ComponentKind::Thermal;
  c.kinds[pt::kSgLevel] = ComponentKind::Thermal;
  c.kinds[pt::kFwPumpOn] = ComponentKind::PumpOrValve;
  c.kinds[pt::kFwValvePos] = ComponentKind::PumpOrValve;
  c.kinds[pt::kFwValveCmd] = ComponentKind::PumpOrValve;
  c.ranges[pt::kSgLevel] = {0.0, 100.0};
  return c;
}

TwinConfig TwinConfig::from_config(const KeyValueConfig& cfg) {
  auto c = defaults();
  c.poll_period_ms = cfg.get_int("poll_period_ms", c.poll_period_ms);
  c.stale_factor = static_cast<int>(cfg.get_int("stale_factor", c.stale_factor));
  for (const auto& key : cfg.keys_with_prefix("kind.")) {
    const auto tag = key.substr(5);
    auto kind = component_kind_from_string(cfg.require_string(key));
    if (!kind) throw ConfigError(cfg.origin() + ": " + key + " must be THERMAL or PUMP_OR_VALVE");
    c.kinds[tag] = *kind;
  }
  for (const auto& key : cfg.keys_with_prefix("range.")) {
    const auto rest = key.substr(6);
    const auto dot = rest.rfind('.');
    if (dot == std::string::npos) throw ConfigError(cfg.origin() + ": bad range key " + key);
    const auto tag = rest.substr(0, dot);
    const auto bound = rest.substr(dot + 1);
    auto& r = c.ranges[tag];
    if (bound == "min") {
      r.min = cfg.get_double(key, r.min);
    } else if (bound == "max") {
      r.max = cfg.get_double(key, r.max);
    } else {
      throw ConfigError(cfg.origin() + ": bad range key " + key);
    }
  }
  c.validate();
  return c;
}

void TwinConfig::validate() const {
  if (poll_period_ms < 10) throw ConfigError("twin poll_period_ms must be >= 10");
  if (stale_factor < 1) throw ConfigError("twin stale_factor must be >= 1");
  for (const auto& [tag, r] : ranges) {
    if (!(r.max > r.min)) throw ConfigError("gradient range for " + tag + " must have max > min");
  }
}

std::optional<ComponentKind> TwinConfig::kind_of(const std::string& tag) const {
  auto it = kinds.find(tag);
  if (it == kinds.end()) return std::nullopt;
  return it->second;
}

GradientRange TwinConfig::range_of(const std::string& tag) const {
  auto it = ranges.find(tag);
  return it == ranges.end() ? GradientRange{} : it->second;
}

StatusEncoding encode(ComponentKind kind, double value, const GradientRange& range) {
  StatusEncoding e;
  e.kind = kind;
  if (kind == ComponentKind::PumpOrValve) {
    e.color = value > 0.0 ? OnOff::RedRunningOpen : OnOff::GreenSecuredShut;
  } else {
    e.gradient = std::clamp((value - range.min) / (range.max - range.min), 0.0, 1.0);
  }
  return e;
}

TwinMirror::TwinMirror(historian::SensorManifest watch, TwinConfig cfg, tagbus::Link& historian)
    : cfg_(std::move(cfg)), historian_(historian) {
  cfg_.validate();
  for (const auto& e : watch) {
    Entry entry;
    entry.var.tag = e.tag;
    vars_.emplace(e.tag, entry);
  }
}

std::vector<std::string> TwinMirror::watched() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [tag, e] : vars_) out.push_back(tag);
  return out;
}

bool TwinMirror::poll_update(std::int64_t now_ms) {
  if (last_poll_ms_ && now_ms - *last_poll_ms_ < cfg_.poll_period_ms) {
    std::unique_lock lock(mutex_);
    refresh_ages(now_ms);
    return false;
  }
  poll_now(now_ms);
  return true;
}

void TwinMirror::poll_now(std::int64_t now_ms) {
  last_poll_ms_ = now_ms;
  std::map<std::string, tagbus::TagValue> values;
  try {
    values = historian_.read_tags(watched());
  } catch (const std::exception& e) {
    log::debug("twin", std::string("historian poll failed: ") + e.what());
  }
  std::unique_lock lock(mutex_);
  for (auto& [tag, entry] : vars_) {
    auto it = values.find(tag);
    if (it == values.end()) continue;
    auto v = it->second.as_double();
    if (!v) continue;
    if (it->second.timestamp_ms != entry.var.producer_t_ms) {
      entry.var.producer_t_ms = it->second.timestamp_ms;
      entry.changed_at_ms = now_ms;
    }
    entry.var.value = *v;
    entry.var.quality = it->second.quality;
  }
  refresh_ages(now_ms);
}

void TwinMirror::refresh_ages(std::int64_t now_ms) {
  const auto limit = cfg_.stale_factor * cfg_.poll_period_ms;
  for (auto& [tag, entry] : vars_) {
    if (entry.var.producer_t_ms < 0) continue;
    entry.var.age_ms = now_ms - entry.changed_at_ms;
    entry.var.status = entry.var.age_ms > limit ? Freshness::Stale : Freshness::Fresh;
  }
}

MirrorVar TwinMirror::get(const std::string& tag) const {
  std::shared_lock lock(mutex_);
  auto it = vars_.find(tag);
  if (it == vars_.end()) throw historian::UnknownTag("tag not watched by the twin: " + tag);
  return it->second.var;
}

std::vector<MirrorVar> TwinMirror::snapshot() const {
  std::shared_lock lock(mutex_);
  std::vector<MirrorVar> out;
  for (const auto& [tag, e] : vars_) out.push_back(e.var);
  return out;
}

StatusEncoding TwinMirror::status_encoding(const std::string& tag) const {
  auto kind = cfg_.kind_of(tag);
  if (!kind) throw UnknownKind("no component kind configured for " + tag);
  return encode(*kind, get(tag).value, cfg_.range_of(tag));
}

void TwinMirror::set_nav_layout(std::string map_text, std::string zones_text) {
  std::unique_lock lock(mutex_);
  nav_map_ = std::move(map_text);
  nav_zones_ = std::move(zones_text);
}

tagbus::Message TwinMirror::handle(const tagbus::Message& request) {
  auto reply = tagbus::make_reply(request);
  switch (request.op) {
    case tagbus::Op::Read:
      for (const auto& t : request.tags) {
        if (t == tags::kNavMap || t == tags::kNavZones) {
          std::shared_lock lock(mutex_);
          reply.reply[t] = tagbus::make_tag(t, t == tags::kNavMap ? nav_map_ : nav_zones_, 0);
          continue;
        }
        auto v = get(t);
        if (v.producer_t_ms < 0) continue;
        auto q = v.status == Freshness::Stale ? tagbus::Quality::Stale : v.quality;
        reply.reply[t] = tagbus::make_tag(t, v.value, v.producer_t_ms, q);
      }
      break;
    case tagbus::Op::Write:
      for (const auto& [name, tv] : request.writes) {
        if (name != tags::kNavZones || !std::holds_alternative<std::string>(tv.value)) {
          throw std::runtime_error("twin tag " + name + " is read-only");
        }
      }
      for (const auto& [name, tv] : request.writes) {
        std::unique_lock lock(mutex_);
        nav_zones_ = std::get<std::string>(tv.value);
      }
      break;
    case tagbus::Op::Status:
      reply.reply["WATCHED"] = tagbus::make_tag("WATCHED", static_cast<std::int64_t>(vars_.size()), 0);
      break;
    case tagbus::Op::SubscribePoll:
      throw std::runtime_error("SUBSCRIBE_POLL is not supported; poll with READ");
  }
  return reply;
}

}  // namespace twinbed::twin
