#pragma once

namespace eobs {

// Entry point behind the erasure-obs binary.  Exit codes: 0 success,
// 2 validation/config error, 3 numerical divergence reported as the result.
int run_cli(int argc, const char* const* argv);

}  // namespace eobs
