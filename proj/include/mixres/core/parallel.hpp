#pragma once

#include <cstddef>
#include <functional>

namespace mixres::core {

int default_thread_count();
void set_default_thread_count(int threads);

/// Runs fn(i) for i in [0, n) across worker threads. Indices are block
/// partitioned, each result lands in its own slot, so outputs cannot depend
/// on scheduling. If several calls throw, the exception from the lowest
/// index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  int threads = 0);

}  // namespace mixres::core
