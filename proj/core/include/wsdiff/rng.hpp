#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wsdiff {

using Rng = std::mt19937_64;

// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Named substream of a master seed. Streams for distinct names are
// independent for any fixed master seed; the same (seed, name, counter)
// always yields the same stream.
inline Rng substream(std::uint64_t master_seed, std::string_view name, std::uint64_t counter = 0) {
    const std::uint64_t h = fnv1a64(name);
    std::seed_seq seq{
        static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
        static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
        static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32)};
    return Rng(seq);
}

} // namespace wsdiff
