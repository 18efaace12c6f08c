#include "dufia/rng.hpp"

#include <cmath>
#include <numbers>

namespace dufia {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage,
                          std::uint64_t index) {
  // FNV-1a over the stage name, then folded with seed and index.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stage) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix_seed(mix_seed(seed, h), index);
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  // Multiply-shift; bias is below 2^-64 * n and irrelevant at these sizes.
  const unsigned __int128 product =
      static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::uint64_t>(product >> 64);
}

}  // namespace dufia
