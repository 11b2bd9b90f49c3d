#pragma once

#include <string>

// Thin logging facade. The implementation lives in its own translation unit
// so that spdlog's fmt and the fmt copy shipped inside libtorch never meet.
namespace pathosr::log {

enum class Level { kDebug, kInfo, kWarn, kError, kOff };

void set_level(Level level);
void debug(const std::string& message);
void info(const std::string& message);
void warn(const std::string& message);
void error(const std::string& message);

}  // namespace pathosr::log
