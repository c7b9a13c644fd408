#pragma once

#include <cstdint>
#include <random>

namespace repfrechet {

/// SplitMix64 finalizer; decorrelates nearby seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream for replicate `index` of a run seeded with `seed`.
inline std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(mix_seed(mix_seed(seed) ^ mix_seed(index + 0x632be59bd9b4e019ULL)));
}

}  // namespace repfrechet
