#pragma once

#include <iosfwd>

namespace edgesim::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsage = 2 };

/// Entry point of the `edgesim` tool: serve | session | analyze | frames.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace edgesim::cli
