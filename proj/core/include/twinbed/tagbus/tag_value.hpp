#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace twinbed::tagbus {

enum class Quality { Good, Stale, Forced };

std::string_view to_string(Quality q);
std::optional<Quality> quality_from_string(std::string_view s);

using Value = std::variant<double, std::int64_t, bool, std::string>;

// A named, timestamped process variable. Timestamps are assigned by the
// producer (milliseconds since the scenario epoch), never by the transport.
struct TagValue {
  std::string name;
  Value value{0.0};
  std::int64_t timestamp_ms = 0;
  Quality quality = Quality::Good;

  // Numeric view: bools map to 0/1, text is not numeric.
  std::optional<double> as_double() const;

  bool operator==(const TagValue&) const = default;
};

inline TagValue make_tag(std::string name, Value v, std::int64_t t_ms, Quality q = Quality::Good) {
  return TagValue{std::move(name), std::move(v), t_ms, q};
}

}  // namespace twinbed::tagbus
