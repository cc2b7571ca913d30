#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace attnforge {

/// 64-bit FNV-1a. Stable across platforms; used for content hashes and seed
/// derivation.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

/// Zero-padded 16-digit lowercase hex, so lexicographic order equals numeric
/// order.
std::string hex64(std::uint64_t value);

inline std::string content_hash(std::string_view text) { return hex64(fnv1a64(text)); }

/// splitmix64 finalizer, for mixing seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits. Unlike
/// std::uniform_real_distribution this is identical on every standard library.
constexpr double unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace attnforge
