#pragma once

#include <cstdint>
#include <string_view>

namespace sage {

// Seed derivation is spelled out here instead of going through <random>
// distributions, whose output is implementation-defined. Records must be
// reproducible across standard libraries.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t salt) noexcept {
    return splitmix64(parent ^ splitmix64(salt));
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view salt) noexcept {
    return derive_seed(parent, fnv1a64(salt));
}

/// Maps `seed` to an index in [0, n). Requires n > 0.
constexpr std::uint64_t seeded_index(std::uint64_t seed, std::uint64_t n) noexcept {
    // Multiply-shift keeps the bias below 2^-64 * n, far under anything testable.
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(splitmix64(seed)) * static_cast<unsigned __int128>(n);
    return static_cast<std::uint64_t>(wide >> 64);
}

}  // namespace sage
