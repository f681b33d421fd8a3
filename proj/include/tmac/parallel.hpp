#pragma once

#include <cstddef>
#include <functional>

namespace tmac {

/// Calls task(i) for i in [0, n) on up to `workers` threads. Tasks are
/// assigned in contiguous index blocks; results must be written to
/// per-index slots by the caller so reductions can run in index order.
/// The first exception thrown by any task is rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& task);

}  // namespace tmac
