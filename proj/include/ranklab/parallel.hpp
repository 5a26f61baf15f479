#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ranklab {

namespace detail {
inline std::atomic<std::size_t>& thread_setting() {
  static std::atomic<std::size_t> n{0};
  return n;
}
}  // namespace detail

/// Worker count used by all parallel loops. 0 means "not set": fall back to
/// RANKLAB_THREADS, then to the machine's hardware concurrency.
inline void set_thread_count(std::size_t n) { detail::thread_setting() = n; }

inline std::size_t thread_count() {
  if (auto n = detail::thread_setting().load(); n > 0) return n;
  if (const char* env = std::getenv("RANKLAB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n). Each index must write only to its own output;
/// results are then independent of the worker count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Fixed partition of [0, n) into at most `parts` contiguous chunks. The
/// partition depends only on n and parts, never on the worker count, so
/// chunk-wise reductions are bit-stable.
struct Partition {
  std::size_t n;
  std::size_t parts;

  std::size_t size() const { return std::min(parts, n); }
  std::size_t begin(std::size_t c) const { return c * n / size(); }
  std::size_t end(std::size_t c) const { return (c + 1) * n / size(); }
};

inline constexpr std::size_t kReductionChunks = 64;

}  // namespace ranklab
