#pragma once

namespace koopctl {

// Full command-line entry point (subcommands simulate, dmd, train, baseline,
// evaluate, report). Returns the process exit code: 0 success, 2 bad
// configuration or usage, 3 numeric failure, 4 I/O failure. Never calls
// exit(), so it can be driven in-process by tests.
int run_cli(int argc, const char* const* argv);

} // namespace koopctl
