// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace partsmine::core {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Named independent stream derived from one root seed; every stage draws from
// its own stream so runs stay reproducible stage by stage.
inline std::mt19937_64 stream(std::uint64_t root_seed, std::string_view name,
                              std::uint64_t index = 0) {
  const std::uint64_t s = mix64(root_seed ^ mix64(hash_name(name) + index));
  return std::mt19937_64(s);
}

}  // namespace partsmine::core
