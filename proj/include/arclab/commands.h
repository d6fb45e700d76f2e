#ifndef ARCLAB_COMMANDS_H_
#define ARCLAB_COMMANDS_H_

#include <ostream>

#include "arclab/error.h"

namespace arclab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitIo = 3;

int ExitCodeFor(ErrorKind kind);

// Subcommands: curves | toy-train | stats | capacity | shard-bench |
// gradcheck. Results go to `out`, diagnostics to `err`.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace arclab

#endif  // ARCLAB_COMMANDS_H_
