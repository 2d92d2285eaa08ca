#pragma once

#include <cstdint>
#include <random>

namespace blockrec {

// splitmix64 finalizer; decorrelates seeds derived from one master seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic per-component stream: split(master, run_index, component_tag).
inline std::mt19937_64 split_rng(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t substream = 0) {
    return std::mt19937_64(mix64(mix64(master ^ mix64(stream)) ^ mix64(substream)));
}

}  // namespace blockrec
