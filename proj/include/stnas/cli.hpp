#pragma once

#include <iosfwd>

namespace stnas {

/// Entry point for the `stnas` tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stnas
