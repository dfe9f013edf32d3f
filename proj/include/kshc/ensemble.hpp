#ifndef KSHC_ENSEMBLE_HPP
#define KSHC_ENSEMBLE_HPP

#ifdef _OPENMP
#include <omp.h>
#endif

#include <utility>

namespace kshc {

inline int hardware_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Serial reference loop over Monte Carlo paths. Kept as the ground truth the
/// OpenMP runner is tested against.
template <class Body>
void for_each_path_serial(int n_paths, Body&& body) {
  for (int p = 0; p < n_paths; ++p) body(p);
}

/**
 * OpenMP path loop. Each body(p) must write only to path-p slots, so results
 * are independent of scheduling and worker count; with workers <= 1 this is
 * exactly the serial reference.
 */
template <class Body>
void for_each_path(int n_paths, int workers, Body&& body) {
  if (workers <= 1) {
    for_each_path_serial(n_paths, std::forward<Body>(body));
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int p = 0; p < n_paths; ++p) body(p);
#else
  for_each_path_serial(n_paths, std::forward<Body>(body));
#endif
}

}  // namespace kshc

#endif
