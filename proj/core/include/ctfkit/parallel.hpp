#pragma once

#include <cstddef>
#include <functional>

namespace ctfkit {

/// Worker cap: CTFKIT_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_threads();

/// Runs fn(begin, end) over [0, count) in contiguous chunks of at most
/// `chunk` items, spread across worker_threads() threads. `fn` must only
/// write to its own range.
void parallel_chunks(std::size_t count, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace ctfkit
