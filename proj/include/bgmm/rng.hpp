#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace bgmm {

/// SplitMix64 output function.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of stream `index` under `master`:
///   splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15).
/// Replication k of a study uses derive_seed(master, k), so it can be
/// reproduced in isolation.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Random stream used everywhere in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Variates are produced here rather than with <random>
/// distributions so that streams are identical across standard libraries:
///   uniform(): top 53 bits of one engine word, scaled to [0, 1)
///   normal():  Marsaglia polar method, one variate per accepted pair
///   index(k):  floor(k * uniform())
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();
  double normal();
  std::size_t index(std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace bgmm
