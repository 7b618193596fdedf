#pragma once

#include <cstddef>
#include <functional>

namespace templar {

/// Worker count: TEMPLAR_THREADS if set and positive, else hardware concurrency.
unsigned thread_budget();

/// Runs body(i) for i in [0, n) across up to thread_budget() threads. Each
/// index is visited exactly once; callers write results into slot i so output
/// is independent of scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace templar
