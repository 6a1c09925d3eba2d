#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sds {

using Rng = std::mt19937_64;

/// Derives an independent sub-seed from a master seed and a purpose tag.
/// FNV-1a over the tag, mixed with the master seed through splitmix64.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t z = master ^ h;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                    std::uint64_t index) noexcept {
    return derive_seed(derive_seed(master, tag) + index, "#");
}

}  // namespace sds
