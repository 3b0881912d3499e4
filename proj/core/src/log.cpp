#include "nilm/log.hpp"

#include <cstdlib>
#include <memory>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace nilm::log {

namespace {

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("nilm");
    l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return *instance;
}

}  // namespace

void configure_from_env() {
  const char* env = std::getenv("NILM_LOG");
  if (!env) return;
  const std::string value(env);
  if (value == "error") set_level(Level::kError);
  else if (value == "info") set_level(Level::kInfo);
  else if (value == "debug") set_level(Level::kDebug);
  else if (value == "warn") set_level(Level::kWarn);
}

void set_level(Level lvl) {
  switch (lvl) {
    case Level::kError: logger().set_level(spdlog::level::err); break;
    case Level::kWarn: logger().set_level(spdlog::level::warn); break;
    case Level::kInfo: logger().set_level(spdlog::level::info); break;
    case Level::kDebug: logger().set_level(spdlog::level::debug); break;
  }
}

Level level() {
  switch (logger().level()) {
    case spdlog::level::trace:
    case spdlog::level::debug: return Level::kDebug;
    case spdlog::level::info: return Level::kInfo;
    case spdlog::level::warn: return Level::kWarn;
    default: return Level::kError;
  }
}

void error(std::string_view message) { logger().error("{}", message); }
void warn(std::string_view message) { logger().warn("{}", message); }
void info(std::string_view message) { logger().info("{}", message); }
void debug(std::string_view message) { logger().debug("{}", message); }

}  // namespace nilm::log
