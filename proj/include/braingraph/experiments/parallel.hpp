#pragma once

#include <cstddef>
#include <functional>

namespace braingraph {

// Runs body(0..n-1) on up to `jobs` threads. Work items must write only to their own slot;
// the first exception by index is rethrown after all workers finish.
void parallel_for(std::size_t jobs, std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace braingraph
