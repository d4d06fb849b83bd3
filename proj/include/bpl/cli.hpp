#pragma once

#include <iosfwd>

namespace bpl {

/// Exit codes of the `bpl` tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitUnexpected = 1,
    kExitUsage = 2,
    kExitConfig = 3,
    kExitData = 4,
    kExitConvergence = 5,
};

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bpl
