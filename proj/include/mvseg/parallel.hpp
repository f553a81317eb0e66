// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mvseg {

/// Global worker cap, set once from the CLI --threads flag.
int& thread_cap();

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one per
/// worker; callers must only write disjoint state per index so results do not
/// depend on the schedule.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn, int max_threads = 0) {
  if (n == 0) return;
  int cap = max_threads > 0 ? max_threads : thread_cap();
  size_t hw = std::max(1u, std::thread::hardware_concurrency());
  size_t workers = std::min<size_t>(n, cap > 0 ? static_cast<size_t>(cap) : hw);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  size_t chunk = (n + workers - 1) / workers;
  for (size_t w = 0; w < workers; ++w) {
    size_t lo = w * chunk;
    size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mvseg
