#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace loco {

/// Runs one `loco` command line; returns the process exit code. Diagnostics
/// go to `err`, reports to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace loco
