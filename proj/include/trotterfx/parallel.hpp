#pragma once

// Fixed-chunk fan-out. Work is cut into chunks whose boundaries depend only on
// the problem size, so results do not change with the thread count.

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace trotterfx {

/// TROTTERFX_THREADS, default 1. Non-numeric or non-positive values fall back to 1.
inline unsigned thread_count() {
  const char* raw = std::getenv("TROTTERFX_THREADS");
  if (raw == nullptr) return 1;
  try {
    const long value = std::stol(raw);
    return value > 0 ? static_cast<unsigned>(std::min<long>(value, 256)) : 1u;
  } catch (...) {
    return 1;
  }
}

/// Calls body(begin, end) for consecutive chunks of [0, n). The first
/// exception thrown by any chunk is rethrown after all workers finish.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunk, Body&& body, unsigned threads = thread_count()) {
  if (n == 0) return;
  chunk = std::max<std::size_t>(chunk, 1);
  const std::size_t chunks = (n + chunk - 1) / chunk;
  if (threads <= 1 || chunks == 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::exception_ptr failure;
  std::mutex guard;
  std::vector<std::thread> pool;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < chunks; c += workers) {
        try {
          body(c * chunk, std::min(n, (c + 1) * chunk));
        } catch (...) {
          std::lock_guard lock(guard);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace trotterfx
