#include "shiftindex/core.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace shiftindex {

void parallel_for(std::int64_t n, ExecMode mode, const std::function<void(std::int64_t)>& fn) {
    if (mode == ExecMode::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
#endif
    }
    for (std::int64_t i = 0; i < n; ++i) fn(i);
}

}  // namespace shiftindex
