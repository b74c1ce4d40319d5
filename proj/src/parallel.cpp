#include "sphereflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace sphereflow {

namespace {
std::atomic<int> g_threads{1};
constexpr std::size_t kSumBlock = 1024;
}  // namespace

void set_thread_count(int threads) { g_threads = std::max(1, threads); }

int thread_count() { return g_threads; }

void parallel_for(std::size_t count, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (count == 0) return;
  grain = std::max<std::size_t>(1, grain);
  const std::size_t chunks = (count + grain - 1) / grain;
  const int workers = static_cast<int>(
      std::min<std::size_t>(chunks, static_cast<std::size_t>(thread_count())));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c)
      body(c * grain, std::min(count, (c + 1) * grain));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++)
      body(c * grain, std::min(count, (c + 1) * grain));
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double deterministic_sum(std::size_t count,
                         const std::function<double(std::size_t)>& term) {
  const std::size_t blocks = (count + kSumBlock - 1) / kSumBlock;
  std::vector<double> partial(blocks, 0.0);
  parallel_for(blocks, 1, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t b = lo; b < hi; ++b) {
      double s = 0.0;
      const std::size_t end = std::min(count, (b + 1) * kSumBlock);
      for (std::size_t i = b * kSumBlock; i < end; ++i) s += term(i);
      partial[b] = s;
    }
  });
  return pairwise_sum(partial);
}

}  // namespace sphereflow
