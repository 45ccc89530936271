#pragma once

#include <cstdint>
#include <functional>

namespace plastigen {

/// Resolves the worker count. `requested` > 0 wins over auto-detection;
/// the PLASTIGEN_THREADS environment variable, when set to a positive value,
/// caps the result (0 or unset means auto).
int worker_count(int requested = 0);

/// Runs fn(0), ..., fn(n-1) across up to `threads` workers. Items must be
/// independent; the first exception thrown by any item is rethrown on the
/// calling thread after all workers join.
void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t)>& fn);

}  // namespace plastigen
