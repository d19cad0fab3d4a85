#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pmufog {

/// Derives an independent 64-bit seed for a named substream ("gen", "detect", "sim", ...).
/// Every source of randomness in the project is routed through this so a single
/// top-level seed reproduces a whole pipeline.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0) {
    // FNV-1a over the stream name keeps the mapping stable across standard libraries.
    std::uint64_t name_hash = 0xcbf29ce484222325ULL;
    for (const char c : stream) {
        name_hash ^= static_cast<unsigned char>(c);
        name_hash *= 0x100000001b3ULL;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(name_hash), static_cast<std::uint32_t>(name_hash >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

using Rng = std::mt19937_64;

}  // namespace pmufog
