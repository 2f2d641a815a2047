#pragma once

#include <cstdint>
#include <random>

namespace precipgen {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; decorrelates nearby integer seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of an independent stream `stream` derived from `master`. Realization r
/// of a run uses derive_seed(master, r).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return mix_seed(mix_seed(master) ^ (stream * 0xd1b54a32d192ed03ULL + 1));
}

} // namespace precipgen
