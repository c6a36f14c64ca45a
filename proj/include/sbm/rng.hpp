#pragma once

#include <cstdint>
#include <random>

namespace sbm {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` under `master`. The rule is
/// mix64(mix64(master) ^ mix64(index + 1)), so streams for distinct indices
/// never share a seed with the master stream itself.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(mix64(master) ^ mix64(index + 1));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t index) {
  return Rng{derive_seed(master, index)};
}

}  // namespace sbm
