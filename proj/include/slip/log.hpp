#pragma once

#include <string_view>

namespace slip {

enum class LogLevel { debug = 0, info = 1, warning = 2, error = 3, off = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();

void log_info(std::string_view message);
void log_warning(std::string_view message);
/// Emits `message` only the first time it is seen under `key`.
void log_warning_once(std::string_view key, std::string_view message);

}  // namespace slip
