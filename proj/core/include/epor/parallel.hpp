#pragma once

// Minimal chunked parallel-for. Work items write to their own output slots
// and reductions happen afterwards with deterministic pairwise sums, so the
// thread count never changes results.

#include <cstddef>
#include <functional>

namespace epor {

// 0 restores the default (hardware concurrency).
void set_max_threads(unsigned n);
unsigned max_threads();

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace epor
