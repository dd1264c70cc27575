#pragma once

#include <string>

namespace sarsfe {

enum class LogLevel { Debug, Info, Warn, Error };

/// Messages below this level are dropped. Default Info.
void set_log_level(LogLevel level);
LogLevel log_level();

/// Writes "[level] message" to stderr; thread-safe.
void log(LogLevel level, const std::string& message);
inline void log_info(const std::string& m) { log(LogLevel::Info, m); }
inline void log_warn(const std::string& m) { log(LogLevel::Warn, m); }

}  // namespace sarsfe
