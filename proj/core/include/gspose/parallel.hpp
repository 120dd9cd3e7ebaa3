#pragma once

#include <cstddef>
#include <functional>

namespace gspose {

/// Caps the worker pool used by every parallel stage. 0 selects the
/// hardware concurrency.
void set_num_threads(int n);
int num_threads();

/// Runs fn(i) for i in [0, n) across the worker pool. Each index is handled
/// by exactly one worker; callers must not rely on execution order. Nested
/// calls from inside a worker run serially on that worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace gspose
