#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fpp {

inline unsigned default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Runs body(i) for i in [0, n) on up to `threads` workers with static
// contiguous chunks. Callers write results into slot i, so any reduction done
// afterwards in index order is independent of the thread count.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  if (threads == 0) threads = default_thread_count();
  const std::size_t workers = std::min<std::size_t>(threads, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Paths are grouped into fixed blocks; each block accumulates its paths in
/// index order and blocks are merged in block order. The block layout depends
/// only on n_paths, never on the number of workers.
inline constexpr std::size_t kReductionBlock = 256;

template <class Acc, class MakeAcc, class PerPath, class Merge>
Acc ensemble_reduce(std::size_t n_paths, unsigned threads, MakeAcc&& make_acc, PerPath&& per_path, Merge&& merge) {
  const std::size_t n_blocks = (n_paths + kReductionBlock - 1) / kReductionBlock;
  std::vector<Acc> partial;
  partial.reserve(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) partial.push_back(make_acc());
  parallel_for(n_blocks, threads, [&](std::size_t b) {
    const std::size_t begin = b * kReductionBlock;
    const std::size_t end = std::min(n_paths, begin + kReductionBlock);
    for (std::size_t i = begin; i < end; ++i) per_path(i, partial[b]);
  });
  Acc total = make_acc();
  for (const auto& p : partial) merge(total, p);
  return total;
}

}  // namespace fpp
