#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kpzlab {

// Worker count: KPZLAB_WORKERS if set, else the hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("KPZLAB_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Runs fn(replica) for replica in [0, count) on a bounded pool and returns the results in
// replica order, so aggregation never depends on scheduling.
template <class Fn>
auto run_replicas(std::uint64_t count, Fn fn, unsigned workers = worker_count()) {
  using R = decltype(fn(std::uint64_t{}));
  std::vector<R> results(count);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::uint64_t r = next.fetch_add(1);
      if (r >= count) return;
      try {
        results[r] = fn(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
        return;
      }
    }
  };
  const unsigned w = workers == 0 ? 1u : std::min<std::uint64_t>(workers, count == 0 ? 1 : count);
  if (w <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < w; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace kpzlab
