#pragma once

#include <cstdint>

// Counter-based random numbers.  Every draw is a pure function of
// (seed, counter, lane), so simulations are reproducible bit-for-bit no
// matter how the work is split across threads: a worker that needs the
// value for step t simply hashes t, without sharing any generator state.

namespace eobs::rng {

// SplitMix64 finalizer; full-avalanche 64-bit mixer.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Independent substream seed for (parent seed, index, role).  Used to give
// each Monte Carlo realization its own erasure and noise streams.
[[nodiscard]] constexpr std::uint64_t substream(std::uint64_t seed, std::uint64_t index,
                                               std::uint64_t role) noexcept {
    return mix64(mix64(mix64(seed) ^ index) ^ (role * 0x9e3779b97f4a7c15ULL));
}

[[nodiscard]] constexpr std::uint64_t word_at(std::uint64_t seed, std::uint64_t counter,
                                              std::uint64_t lane = 0) noexcept {
    return mix64(mix64(mix64(seed) ^ counter) ^ (lane * 0xbf58476d1ce4e5b9ULL));
}

// Uniform double in [0, 1) with 53 significant bits.
[[nodiscard]] constexpr double uniform01(std::uint64_t seed, std::uint64_t counter,
                                         std::uint64_t lane = 0) noexcept {
    return static_cast<double>(word_at(seed, counter, lane) >> 11) * 0x1.0p-53;
}

// Stream roles used when deriving per-realization substreams.
inline constexpr std::uint64_t role_erasure = 1;
inline constexpr std::uint64_t role_noise = 2;

}  // namespace eobs::rng
