#include "kmyriad/threading.hpp"

#include <cstdlib>
#include <thread>
#include <vector>

namespace kmyriad {

int worker_count() {
  static const int cached = [] {
    if (const char* env = std::getenv("KMYRIAD_THREADS")) {
      const int n = std::atoi(env);
      if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return cached;
}

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
  const int workers = worker_count();
  if (n <= 0) return;
  if (workers <= 1 || n < 2048) {
    fn(0, n);
    return;
  }
  const std::int64_t chunks = std::min<std::int64_t>(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(chunks);
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::int64_t begin = n * c / chunks;
    const std::int64_t end = n * (c + 1) / chunks;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace kmyriad
