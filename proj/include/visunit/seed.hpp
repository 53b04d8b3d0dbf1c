#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace visunit {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Derives an independent seed for a labeled sub-stream ("folds", "jitter",
// "ties", ...). Adding a new label never changes the seeds of existing ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  return detail::splitmix64(master ^ detail::splitmix64(detail::fnv1a(label)));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index) {
  return detail::splitmix64(derive_seed(master, label) + detail::splitmix64(index + 1));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace visunit
