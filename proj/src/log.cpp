#include "slip/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>
#include <set>
#include <string>

namespace slip {
namespace {

std::atomic<LogLevel> g_level{LogLevel::info};

void emit(LogLevel level, const char* tag, std::string_view message) {
  if (level < g_level.load()) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[slip] " << tag << ": " << message << '\n';
}

}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level.load(); }

void log_info(std::string_view message) { emit(LogLevel::info, "info", message); }
void log_warning(std::string_view message) { emit(LogLevel::warning, "warning", message); }

void log_warning_once(std::string_view key, std::string_view message) {
  static std::mutex mu;
  static std::set<std::string, std::less<>> seen;
  {
    std::lock_guard lock(mu);
    if (!seen.emplace(key).second) return;
  }
  log_warning(message);
}

}  // namespace slip
