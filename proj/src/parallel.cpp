#include "eobs/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace eobs {

int resolve_threads(int requested) {
#ifdef _OPENMP
    if (requested > 0) return requested;
    if (const char* env = std::getenv("ERASURE_OBS_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
            // Unparseable values fall through to auto.
        }
    }
    return omp_get_max_threads();
#else
    (void)requested;
    return 1;
#endif
}

}  // namespace eobs
