#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nilm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `nilm` invocation. `args` excludes the program name.
/// Returns 0 on success, 1 on environment/I/O failures, 2 on usage/config errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nilm::cli
