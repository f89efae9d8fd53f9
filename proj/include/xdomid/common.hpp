#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace xdomid {

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

// Worker cap for read-only fan-out. Training never uses this.
inline int worker_count() {
  const char* env = std::getenv("XDOMID_THREADS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

// Runs fn(i) for i in [0, n). Results must be written to pre-sized slots so
// the output ordering is index-stable regardless of the worker count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  int workers = worker_count();
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = lo + chunk < n ? lo + chunk : n;
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace xdomid

#define XD_CHECK(cond, msg) \
  do {                      \
    if (!(cond)) ::xdomid::fail(msg); \
  } while (0)
