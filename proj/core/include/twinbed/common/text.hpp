#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace twinbed {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string> split(std::string_view s, char sep);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

// Shortest text that parses back to the identical double.
std::string format_double(double v);

// Shell-style pattern with `*` (any run) and `?` (one char).
bool glob_match(std::string_view pattern, std::string_view text);

}  // namespace twinbed
