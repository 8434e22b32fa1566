#include "phasor/threading.hpp"

#include <thread>
#include <vector>

namespace phasor {

static int g_num_threads = 1;

void set_num_threads(int n) { g_num_threads = n < 1 ? 1 : n; }
int num_threads() { return g_num_threads; }

namespace detail {

// Workers never spawn workers of their own; a nested parallel_for runs
// inline so batch-level parallelism does not oversubscribe.
thread_local bool t_inside_worker = false;

void parallel_for_impl(std::size_t total, void* ctx, void (*fn)(void*, std::size_t, std::size_t)) {
  std::size_t workers = static_cast<std::size_t>(g_num_threads);
  if (workers <= 1 || total <= 1 || t_inside_worker) {
    fn(ctx, 0, total);
    return;
  }
  if (workers > total) workers = total;

  const std::size_t chunk = total / workers;
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  for (std::size_t t = 0; t + 1 < workers; ++t) {
    threads.emplace_back(
        [fn, ctx](std::size_t b, std::size_t e) {
          t_inside_worker = true;
          fn(ctx, b, e);
          t_inside_worker = false;
        },
        t * chunk, (t + 1) * chunk);
  }
  t_inside_worker = true;
  fn(ctx, (workers - 1) * chunk, total);  // remainder runs on the caller
  t_inside_worker = false;
  for (auto& th : threads) th.join();
}

}  // namespace detail
}  // namespace phasor
