#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lamedet {

// Process-wide worker cap. 0 means "use hardware concurrency".
inline unsigned& thread_limit_ref() {
  static unsigned limit = 0;
  return limit;
}

inline void set_thread_limit(unsigned n) { thread_limit_ref() = n; }

inline unsigned worker_count(std::size_t n) {
  const unsigned limit = thread_limit_ref();
  const unsigned hw = limit != 0 ? limit : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(hw, n));
}

// As parallel_chunks below, but hands the callback its worker index so
// callers can keep worker-local accumulators and merge them in index order.
// Exceptions from workers are rethrown (lowest worker index wins).
template <typename Fn>
void parallel_chunks_indexed(std::size_t n, unsigned workers, Fn&& fn) {
  if (n == 0) return;
  if (workers <= 1) {
    fn(0u, std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    const std::size_t lo = static_cast<std::size_t>(t) * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, &errors, t, lo, hi] {
      try {
        fn(t, lo, hi);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Static partition of [0, n) into one contiguous range per worker; fn(lo, hi)
// runs once per range. Every index is handled by exactly one worker and
// workers share no accumulators, so results never depend on the thread count
// or scheduling. Callers that reduce across items must merge worker-local
// partials in index order to keep bitwise determinism.
template <typename Fn>
void parallel_chunks(std::size_t n, Fn&& fn) {
  parallel_chunks_indexed(n, worker_count(n),
                          [&fn](unsigned, std::size_t lo, std::size_t hi) { fn(lo, hi); });
}

}  // namespace lamedet
