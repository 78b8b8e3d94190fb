#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace tag2cred {

// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept {
  std::uint64_t h = basis;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seeded 64-bit digest of a byte string.
constexpr std::uint64_t hash64(std::string_view s, std::uint64_t seed = 0) noexcept {
  return mix64(fnv1a64(s) ^ mix64(seed));
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);
std::string hex64(std::uint64_t v);

}  // namespace tag2cred
