#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mvsens {

using Rng = std::mt19937_64;

/// Recorded in output metadata so runs can be reproduced.
inline constexpr std::string_view kRngFamily = "mt19937_64 seeded by splitmix64(seed, domain, index)";

/// Stream domains keep draws for different purposes independent.
enum class StreamDomain : std::uint64_t { bootstrap = 1, simulation_data = 2, simulation_bootstrap = 3, oracle = 4, verify = 5 };

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// 64-bit seed for stream `index` of `domain` under the master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, StreamDomain domain, std::uint64_t index) {
  std::uint64_t state = seed;
  std::uint64_t h = splitmix64(state);
  state = h ^ static_cast<std::uint64_t>(domain);
  h = splitmix64(state);
  state = h ^ index;
  return splitmix64(state);
}

inline Rng make_stream(std::uint64_t seed, StreamDomain domain, std::uint64_t index) {
  std::uint64_t s = derive_seed(seed, domain, index);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(splitmix64(s)), static_cast<std::uint32_t>(splitmix64(s))};
  return Rng(seq);
}

}  // namespace mvsens
