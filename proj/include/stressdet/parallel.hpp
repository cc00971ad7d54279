// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stressdet {

/// Execution policy for the data-parallel kernels. Every kernel writes
/// per-index results into its own slot, so serial and parallel runs are
/// bitwise identical; the serial path is kept as the reference the tests
/// and the benchmark compare against.
enum class Exec { serial, parallel };

/// Runs fn(i) for i in [0, n). Under Exec::parallel the iterations are
/// distributed across OpenMP threads; fn must only write to state owned
/// by iteration i.
template <typename Fn>
void parallel_for(Exec exec, std::ptrdiff_t n, Fn&& fn) {
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      fn(i);
    }
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      fn(i);
    }
  }
}

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace stressdet
