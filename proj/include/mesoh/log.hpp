#pragma once

#include <functional>
#include <string>

namespace mesoh {

enum class LogLevel { Debug, Info, Warn, Error };

/// Process-wide log sink; defaults to stderr for Warn and above.
using LogSink = std::function<void(LogLevel, const std::string&)>;

void set_log_sink(LogSink sink);
void set_log_level(LogLevel level);
void log(LogLevel level, const std::string& msg);

inline void warn(const std::string& msg) { log(LogLevel::Warn, msg); }
inline void info(const std::string& msg) { log(LogLevel::Info, msg); }

}  // namespace mesoh
