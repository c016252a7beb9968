#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace tmf {

/// Calls fn(k) for k in [0, count) on up to `threads` workers. Each index is
/// visited exactly once; threads <= 1 runs inline in index order. The first
/// exception thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

/// Stateless 64-bit mixer used to derive per-task seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace tmf
