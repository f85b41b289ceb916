#include "spgnn/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace spgnn {

namespace {
int g_threads = 0;
thread_local bool tls_in_worker = false;
}  // namespace

void set_num_threads(int n) { g_threads = n < 0 ? 0 : n; }

int num_threads() {
  if (g_threads > 0) return g_threads;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  int workers = num_threads();
  if (n == 0) return;
  if (workers <= 1 || n == 1 || tls_in_worker) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (static_cast<std::size_t>(workers) > n) workers = static_cast<int>(n);
  std::atomic<std::size_t> cursor{0};
  auto body = [&]() {
    tls_in_worker = true;
    for (;;) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= n) break;
      fn(i);
    }
    tls_in_worker = false;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
}

}  // namespace spgnn
