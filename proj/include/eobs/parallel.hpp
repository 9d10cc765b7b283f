#pragma once

namespace eobs {

// Number of worker threads a parallel kernel should use.
//
// requested > 0 wins; otherwise the ERASURE_OBS_THREADS environment variable
// is consulted (0 or unset = one thread per core).  Builds without OpenMP
// always resolve to 1.
[[nodiscard]] int resolve_threads(int requested = 0);

}  // namespace eobs
