#include "dcan/log.hpp"

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace dcan {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("DCAN_LOG");
    const std::string_view v = env ? env : "";
    if (v == "debug") return LogLevel::debug;
    if (v == "info") return LogLevel::info;
    return LogLevel::quiet;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::clog << "[dcan] " << msg << '\n';
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) std::clog << "[dcan] " << msg << '\n';
}

}  // namespace dcan
