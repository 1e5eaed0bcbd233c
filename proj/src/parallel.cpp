#include "mwq/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mwq {

int max_threads() {
#ifdef _OPENMP
  int n = omp_get_max_threads();
#else
  int n = 1;
#endif
  if (const char* env = std::getenv("MWQ_SIM_THREADS")) {
    try {
      int cap = std::stoi(env);
      if (cap >= 1 && cap < n) n = cap;
    } catch (...) {
      // unparsable cap is ignored
    }
  }
  return n < 1 ? 1 : n;
}

namespace detail {

void run_indexed(int n, int threads, void (*body)(void*, int), void* ctx) {
#ifdef _OPENMP
  if (threads > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int i = 0; i < n; ++i) body(ctx, i);
    return;
  }
#else
  (void)threads;
#endif
  for (int i = 0; i < n; ++i) body(ctx, i);
}

}  // namespace detail
}  // namespace mwq
