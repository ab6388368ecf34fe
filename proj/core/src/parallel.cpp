#include "fblab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace fblab {

int thread_budget() {
  static const int budget = [] {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("FBLAB_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end != env && v >= 1) return std::min<int>(static_cast<int>(v), hw);
    }
    return hw;
  }();
  return budget;
}

void parallel_for(int count, const std::function<void(int)>& task) {
  if (count <= 0) return;
  const int workers = std::min(thread_budget(), count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  auto body = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count || failed.load()) break;
      try {
        task(i);
      } catch (...) {
        if (!failed.exchange(true)) first_error = std::current_exception();
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  if (failed.load() && first_error) std::rethrow_exception(first_error);
}

double pairwise_sum(std::span<const double> slots) {
  const std::size_t k = slots.size();
  if (k == 0) return 0.0;
  if (k == 1) return slots[0];
  if (k == 2) return slots[0] + slots[1];
  const std::size_t half = k / 2;
  return pairwise_sum(slots.first(half)) + pairwise_sum(slots.subspan(half));
}

}  // namespace fblab
