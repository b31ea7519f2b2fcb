#pragma once

// Deterministic index-parallel loops.
//
// parallel_for(n, body) runs body(i) for every i in [0, n), possibly on
// several threads.  Each index is handed out exactly once, so loops whose
// bodies write only to per-index slots produce results that are independent
// of the worker count.  The worker count is the smaller of the hardware
// concurrency and the GLUCOKIN_THREADS environment variable (when set), and
// is always at least one.  Exceptions thrown by the body are rethrown on the
// calling thread after all workers finish.

#include <cstddef>
#include <functional>

namespace glucokin {

int worker_count();

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t)>& body);

}  // namespace glucokin
