#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mesoh {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent seed for a named stream ("init", "mask", "pairing",
/// "generation", ...) and an optional sub-index, so that adding a new consumer
/// of randomness never shifts the seeds of existing ones.
inline std::uint64_t stream_seed(std::uint64_t base, std::string_view name, std::uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ fnv1a64(name)) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t base, std::string_view name, std::uint64_t index = 0) {
  return Rng(stream_seed(base, name, index));
}

/// Symmetric Dirichlet draw of dimension `dim`.
inline std::vector<double> sample_dirichlet(Rng& rng, std::size_t dim, double concentration) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> out(dim);
  double total = 0.0;
  for (auto& v : out) {
    v = gamma(rng);
    total += v;
  }
  for (auto& v : out) v /= total;
  return out;
}

}  // namespace mesoh
