#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace moyal::parallel {

namespace detail {
inline std::atomic<std::size_t>& cap_override() {
  static std::atomic<std::size_t> value{0};
  return value;
}
}  // namespace detail

/// Maximum number of worker threads. MOYAL_LAB_THREADS caps it; an explicit
/// set_thread_cap() wins over the environment.
inline std::size_t thread_cap() {
  if (auto forced = detail::cap_override().load(); forced > 0) return forced;
  if (const char* env = std::getenv("MOYAL_LAB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Pass 0 to fall back to the environment / machine default.
inline void set_thread_cap(std::size_t threads) { detail::cap_override().store(threads); }

/// Calls body(begin, end) over disjoint chunks of [0, n). Chunks never share
/// output locations, so results do not depend on the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_chunk = 16) {
  const std::size_t workers = std::min(thread_cap(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_chunk)));
  if (workers <= 1) {
    body(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(std::size_t{0}, std::min(n, chunk));
}

}  // namespace moyal::parallel
