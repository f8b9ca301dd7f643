#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <vector>

namespace mvop {

namespace detail {
inline std::atomic<unsigned>& thread_limit() {
  static std::atomic<unsigned> limit{0};  // 0 = machine parallelism
  return limit;
}
}  // namespace detail

// Caps the number of worker threads used by per-observation loops. Results
// never depend on this value.
inline void set_thread_count(unsigned n) { detail::thread_limit().store(n); }

inline unsigned thread_count() {
  const unsigned limit = detail::thread_limit().load();
  if (limit > 0) return limit;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Calls fn(i) for every i in [0, n), splitting the range into contiguous
// chunks across threads. fn must only write to index-owned storage.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), (n + 255) / 256);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      pool.emplace_back([&fn, &errors, w, begin, end] {
        try {
          for (std::size_t i = begin; i < end; ++i) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  // First failing chunk wins, so the reported error is the lowest-index one.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Pairwise summation in index order. The split points depend only on the
// length, so the result is bit-identical however the terms were produced.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace mvop
