#pragma once

#include <string>

namespace dcan {

// Verbosity comes from DCAN_LOG: "quiet" (default), "info" or "debug".
enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace dcan
