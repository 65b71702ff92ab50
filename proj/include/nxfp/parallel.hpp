// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace nxfp {

// Worker count: NXFP_THREADS when set (at most 256), else hardware concurrency.
unsigned worker_count();

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks never overlap,
// so callers writing to per-index slots get output independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace nxfp
