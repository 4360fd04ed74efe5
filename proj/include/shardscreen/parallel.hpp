#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace shardscreen {

/// Worker count: SHARDSCREEN_THREADS if set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, n) across the worker pool. Iterations are
/// handed out in contiguous chunks; the first exception thrown is rethrown
/// on the calling thread after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// 64-bit mix of (root, stream) used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t root, std::uint64_t stream);

} // namespace shardscreen
