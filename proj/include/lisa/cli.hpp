#pragma once

#include <ostream>

namespace lisa {

/// Entry point of the `lisa` command-line tool. Returns the process exit
/// code: 0 on success, 2 on a usage error, 1 on a runtime error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lisa
