#include "tmac/parallel.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tmac {

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& task) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run_block = [&](std::size_t begin, std::size_t end) {
    try {
      for (std::size_t i = begin; i < end; ++i) task(i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  const std::size_t block = (n + workers - 1) / workers;
  std::vector<std::jthread> threads;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * block);
    const std::size_t end = std::min(n, begin + block);
    if (begin < end) threads.emplace_back(run_block, begin, end);
  }
  run_block(0, std::min(n, block));
  threads.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace tmac
