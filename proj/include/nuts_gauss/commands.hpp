#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace nuts_gauss {

std::string_view version();

/// Runs the command line `args` (without the program name). Returns the
/// process exit code; messages go to `out` and `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nuts_gauss
