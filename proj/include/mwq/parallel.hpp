#pragma once

#include <memory>
#include <type_traits>
#include <utility>

namespace mwq {

/// Execution policy for batch kernels (Monte Carlo estimators, sweep cells).
/// Serial is the reference path; Parallel fans the index range out over
/// OpenMP threads. Both paths must produce bit-identical results: workers
/// write into per-index slots and any reduction happens afterwards in index
/// order.
enum class Exec { Serial, Parallel };

/// Worker count used by Exec::Parallel. Honors the MWQ_SIM_THREADS
/// environment variable as an upper cap; falls back to the OpenMP default.
/// Always >= 1, and exactly 1 when OpenMP is not compiled in.
int max_threads();

namespace detail {
void run_indexed(int n, int threads, void (*body)(void*, int), void* ctx);
}

/// Runs body(i) for i in [0, n). With Exec::Parallel the iterations are
/// distributed over threads; iteration order is unspecified, so the body
/// must only touch state owned by index i.
template <typename F>
void for_each_index(int n, Exec exec, F&& body) {
  if (n <= 0) return;
  int threads = exec == Exec::Parallel ? max_threads() : 1;
  using Fn = std::remove_reference_t<F>;
  auto thunk = [](void* ctx, int i) { (*static_cast<Fn*>(ctx))(i); };
  detail::run_indexed(n, threads, thunk,
                      const_cast<void*>(static_cast<const void*>(
                          std::addressof(body))));
}

}  // namespace mwq
