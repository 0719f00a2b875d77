#pragma once

// Command-line front end. `run` is what the lowrank executable calls; tests
// call it directly with string streams.
//
// Subcommands: solve, rip, phase-grid, image-recover, hankel, ensemble-dump.
// Results are JSON except phase-grid, which writes the grid CSV.

#include <iosfwd>

namespace lowrank::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lowrank::cli
