#pragma once

#include <functional>
#include <string_view>

namespace hostpred {

enum class LogLevel { info = 0, warning = 1 };

using LogHandler = std::function<void(LogLevel, std::string_view)>;

// Replaces the process-wide handler. Passing an empty handler restores stderr.
void set_log_handler(LogHandler handler);
void log_message(LogLevel level, std::string_view message);

inline void log_warning(std::string_view message) { log_message(LogLevel::warning, message); }
inline void log_info(std::string_view message) { log_message(LogLevel::info, message); }

}  // namespace hostpred
