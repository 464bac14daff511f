#pragma once

#include <cstdint>
#include <functional>

namespace surfpde {

/// Global worker count (1 = serial). The CLI wires SURFPDE_THREADS /
/// --deterministic to this; results are bitwise identical for any value
/// because all reductions merge in a fixed order.
void set_num_threads(int n);
int num_threads();

/// Chunked parallel loop over [0, n); chunks are contiguous and workers write
/// disjoint state only.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace surfpde
