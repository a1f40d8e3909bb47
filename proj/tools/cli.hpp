#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gmlm::cli {

enum ExitCode { ok = 0, usage = 1, data = 2, numerical = 3 };

// Runs one subcommand. `args` excludes the program name. Reports go to `out`
// (or the --output file), diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

}  // namespace gmlm::cli
