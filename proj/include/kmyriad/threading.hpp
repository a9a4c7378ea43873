#pragma once

#include <cstdint>
#include <functional>

namespace kmyriad {

// Worker cap: KMYRIAD_THREADS if set, else hardware concurrency.
int worker_count();

// Run fn(begin, end) over disjoint contiguous chunks of [0, n). Each chunk
// writes only its own outputs, so results do not depend on the partition.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace kmyriad
