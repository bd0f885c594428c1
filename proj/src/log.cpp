#include "mesoh/log.hpp"

#include <iostream>
#include <mutex>

namespace mesoh {
namespace {

std::mutex g_mutex;
LogLevel g_level = LogLevel::Warn;
LogSink g_sink;

const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warning";
    case LogLevel::Error: return "error";
  }
  return "?";
}

}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

void set_log_level(LogLevel level) {
  std::lock_guard lock(g_mutex);
  g_level = level;
}

void log(LogLevel level, const std::string& msg) {
  std::lock_guard lock(g_mutex);
  if (g_sink) {
    g_sink(level, msg);
    return;
  }
  if (level < g_level) return;
  std::cerr << "[" << level_name(level) << "] " << msg << '\n';
}

}  // namespace mesoh
