#pragma once

#include <iosfwd>

namespace epplan {

/// Entry point for the `epplan` tool: subcommands gen, plan, run, compare.
/// Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace epplan
