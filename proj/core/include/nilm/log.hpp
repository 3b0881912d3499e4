#pragma once

#include <string>
#include <string_view>

namespace nilm::log {

enum class Level { kError, kWarn, kInfo, kDebug };

/// Reads NILM_LOG={error|info|debug}; unset or unknown leaves the level at warn.
void configure_from_env();
void set_level(Level level);
Level level();

void error(std::string_view message);
void warn(std::string_view message);
void info(std::string_view message);
void debug(std::string_view message);

}  // namespace nilm::log
