#pragma once

#include <sstream>
#include <string>

// Minimal leveled logging to stderr. Verbosity comes from MOCORANK_LOG
// (error, warn, info, debug); default is warn.
namespace mocorank::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

Level verbosity();
void set_verbosity(Level level);
void write(Level level, const std::string& message);

template <typename... Args>
void emit(Level level, const Args&... args) {
  if (static_cast<int>(level) > static_cast<int>(verbosity())) return;
  std::ostringstream os;
  (os << ... << args);
  write(level, os.str());
}

template <typename... Args>
void warn(const Args&... args) { emit(Level::warn, args...); }
template <typename... Args>
void info(const Args&... args) { emit(Level::info, args...); }
template <typename... Args>
void debug(const Args&... args) { emit(Level::debug, args...); }

}  // namespace mocorank::log
