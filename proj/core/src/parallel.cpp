#include "plastigen/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace plastigen {

int worker_count(int requested) {
  int base = requested > 0 ? requested
                           : static_cast<int>(std::thread::hardware_concurrency());
  if (base < 1) base = 1;
  if (const char* env = std::getenv("PLASTIGEN_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0 && cap < base) base = cap;
  }
  return base;
}

void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  if (threads < 1) threads = 1;
  if (threads == 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<std::int64_t>(threads, n));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace plastigen
