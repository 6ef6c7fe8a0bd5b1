#pragma once

#include <string_view>

namespace twinbed::log {

enum class Level { Debug, Info, Warn, Error };

void set_level(Level level);
Level level();

// One line per call: `<iso8601-utc> <LEVEL> [component] message`, to stderr.
void write(Level level, std::string_view component, std::string_view message);

inline void debug(std::string_view c, std::string_view m) { write(Level::Debug, c, m); }
inline void info(std::string_view c, std::string_view m) { write(Level::Info, c, m); }
inline void warn(std::string_view c, std::string_view m) { write(Level::Warn, c, m); }
inline void error(std::string_view c, std::string_view m) { write(Level::Error, c, m); }

}  // namespace twinbed::log
