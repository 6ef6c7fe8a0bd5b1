#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "twinbed/common/config.hpp"
#include "twinbed/historian/historian.hpp"
#include "twinbed/tagbus/link.hpp"

namespace twinbed::twin {

class UnknownKind : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Freshness { Fresh, Stale };
enum class ComponentKind { PumpOrValve, Thermal };
enum class OnOff { RedRunningOpen, GreenSecuredShut };

std::string_view to_string(Freshness f);
std::string_view to_string(ComponentKind k);
std::string_view to_string(OnOff c);
std::optional<ComponentKind> component_kind_from_string(std::string_view s);

struct MirrorVar {
  std::string tag;
  double value = 0.0;
  std::int64_t age_ms = -1;         // -1 until the first sample arrives
  Freshness status = Freshness::Stale;
  std::int64_t producer_t_ms = -1;  // timestamp assigned by the producer
  tagbus::Quality quality = tagbus::Quality::Good;
};

// Color state of a component: on/off for pumps and valves, a 0..1 position on
// the cold-to-hot gradient for thermal tags.
struct StatusEncoding {
  ComponentKind kind = ComponentKind::Thermal;
  std::optional<OnOff> color;
  std::optional<double> gradient;
};

struct GradientRange {
  double min = 0.0;
  double max = 100.0;
};

struct TwinConfig {
  std::int64_t poll_period_ms = 250;
  int stale_factor = 4;
  std::map<std::string, ComponentKind> kinds;
  std::map<std::string, GradientRange> ranges;

  // Built-in kinds for the plant tags; `kind.<TAG>`, `range.<TAG>.min` and
  // `range.<TAG>.max` override them.
  static TwinConfig defaults();
  static TwinConfig from_config(const KeyValueConfig& cfg);
  void validate() const;

  std::optional<ComponentKind> kind_of(const std::string& tag) const;
  GradientRange range_of(const std::string& tag) const;
};

StatusEncoding encode(ComponentKind kind, double value, const GradientRange& range);

namespace tags {
inline constexpr const char* kNavMap = "NAV_MAP";
inline constexpr const char* kNavZones = "NAV_ZONES";
}  // namespace tags

// Mirrors the watched tags from the historian. Staleness is the only failure
// signal: a variable whose producer timestamp has not changed for more than
// stale_factor poll periods is STALE.
class TwinMirror {
 public:
  TwinMirror(historian::SensorManifest watch, TwinConfig cfg, tagbus::Link& historian);

  // Polls the historian if a poll period has elapsed. Returns true when a
  // READ was attempted.
  bool poll_update(std::int64_t now_ms);
  // Unconditional poll.
  void poll_now(std::int64_t now_ms);

  // Throws historian::UnknownTag for tags not being watched.
  MirrorVar get(const std::string& tag) const;
  std::vector<MirrorVar> snapshot() const;
  StatusEncoding status_encoding(const std::string& tag) const;

  const TwinConfig& config() const { return cfg_; }
  std::vector<std::string> watched() const;

  // Navigation layout served to the RL environment in twin mode.
  void set_nav_layout(std::string map_text, std::string zones_text);

  tagbus::Message handle(const tagbus::Message& request);

 private:
  struct Entry {
    MirrorVar var;
    std::int64_t changed_at_ms = 0;
  };
  void refresh_ages(std::int64_t now_ms);

  TwinConfig cfg_;
  tagbus::TagClient historian_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Entry> vars_;
  std::optional<std::int64_t> last_poll_ms_;
  std::string nav_map_;
  std::string nav_zones_;
};

}  // namespace twinbed::twin
