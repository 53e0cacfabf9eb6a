#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace holoforge {

// Upper bound on worker threads used inside a single op. Reads
// HOLOFORGE_THREADS once; an explicit set_max_threads() call wins.
inline std::size_t& max_threads_slot() {
  static std::size_t slot = [] {
    std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("HOLOFORGE_THREADS")) {
      try {
        long v = std::stol(env);
        if (v >= 1) n = static_cast<std::size_t>(v);
      } catch (...) {
      }
    }
    return n;
  }();
  return slot;
}

inline std::size_t max_threads() { return max_threads_slot(); }
inline void set_max_threads(std::size_t n) { max_threads_slot() = std::max<std::size_t>(1, n); }

// Runs fn(i) for i in [0, count). Each index is processed by exactly one
// thread and fn must only write state owned by index i, so the result does
// not depend on the thread count.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min(max_threads(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace holoforge
