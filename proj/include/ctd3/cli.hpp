#pragma once

// Command-line front end, factored out of main() so tests can drive it
// in-process with captured streams.

#include <iosfwd>

namespace ctd3 {

// Runs one CLI invocation. Returns the process exit code; normal output goes
// to `out`, diagnostics to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace ctd3
