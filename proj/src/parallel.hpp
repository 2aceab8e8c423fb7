#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace dyadlab::detail {

/// Runs body(i) for i in [0, n) on up to `threads` workers over contiguous
/// chunks. The first exception thrown by any worker is rethrown.
template <typename Body>
void parallel_for(std::uint64_t n, int threads, Body&& body) {
  const std::uint64_t workers =
      std::min<std::uint64_t>(std::max(threads, 1), std::max<std::uint64_t>(n, 1));
  if (workers <= 1) {
    for (std::uint64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::uint64_t chunk = (n + workers - 1) / workers;
  for (std::uint64_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::uint64_t lo = w * chunk, hi = std::min(n, lo + chunk);
        for (std::uint64_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace dyadlab::detail
