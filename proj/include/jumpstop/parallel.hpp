#pragma once

#include <cstddef>
#include <functional>

namespace jumpstop {

/// Caps the number of worker threads used by parallel loops. Results never
/// depend on this value: loops only partition work, they never reduce.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Calls body(begin, end) over disjoint chunks covering [0, n).
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace jumpstop
