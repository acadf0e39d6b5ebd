#ifndef GECW_PARALLEL_H_
#define GECW_PARALLEL_H_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace gecw {

// Runs fn(i) for i in [0, n) on up to `workers` threads, each thread taking a
// contiguous block. fn must only write state owned by index i. The first
// exception (lowest block) is rethrown after all threads join.
template <typename Fn>
void ParallelFor(std::size_t n, int workers, Fn&& fn) {
  const std::size_t k =
      std::min<std::size_t>(std::max(workers, 1), std::max<std::size_t>(n, 1));
  if (k <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(k);
  std::vector<std::thread> threads;
  threads.reserve(k);
  for (std::size_t w = 0; w < k; ++w) {
    const std::size_t begin = n * w / k;
    const std::size_t end = n * (w + 1) / k;
    threads.emplace_back([&, w, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace gecw

#endif  // GECW_PARALLEL_H_
