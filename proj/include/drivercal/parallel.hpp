#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace drivercal {

// Run f(i) for i in [0, n) on up to `jobs` threads.  Work items must be
// independent; exceptions inside f terminate (keep f noexcept in spirit).
template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& f) {
  if (n == 0) return;
  if (jobs <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(jobs, n));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace drivercal
