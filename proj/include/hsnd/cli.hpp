#pragma once

namespace hsnd {

// Entry point shared by the binary and the CLI tests. Exit codes: 0 success,
// 1 I/O or file-format failure, 2 configuration/usage error, 3 numerical
// divergence.
int run_cli(int argc, const char* const* argv);

}  // namespace hsnd
