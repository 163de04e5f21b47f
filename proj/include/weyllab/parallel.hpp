#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace weyllab {

// Runs body(i) for i in [0, count) on `threads` workers. Indices are split
// into contiguous blocks, so any per-index output is independent of the
// worker count. Exceptions thrown by body are rethrown on the caller (first
// one by index order wins).
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

// Number of workers to use when the caller passes 0.
unsigned default_threads();

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic per-sample generator keyed by (seed, index).
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ (index * 0xd1b54a32d192ed03ULL)));
}

} // namespace weyllab
