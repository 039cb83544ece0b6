#pragma once

#include <cstddef>
#include <functional>

namespace dpcmf {

// Worker count: DPCMF_THREADS when set (≥1), else hardware concurrency.
// Affects speed only; every parallel construct below yields results that are
// independent of the worker count.
std::size_t worker_count();

// Invokes fn on disjoint contiguous [begin, end) ranges covering [0, n).
// Exceptions thrown by workers are rethrown on the calling thread.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

// Sum of term(i) over [0, n) with a fixed chunk width, partials reduced in
// chunk order — bitwise reproducible for any worker count.
double deterministic_sum(std::size_t n,
                         const std::function<double(std::size_t)>& term);

}  // namespace dpcmf
