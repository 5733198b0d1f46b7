#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace spfa {

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

// Deterministic seed for a sub-stream identified by `parts`.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

// Standard normal deviates via the trigonometric Box-Muller transform over a
// 64-bit Mersenne twister. Each uniform pair yields the cosine deviate and
// then its sine mate. The sequence depends only on the seed.
class NormalGenerator {
 public:
  explicit NormalGenerator(std::uint64_t seed) : engine_(seed) {}

  double next();

  // Uniform on (0, 1], 53-bit resolution.
  double uniform();

 private:
  std::mt19937_64 engine_;
  double mate_ = 0.0;
  bool has_mate_ = false;
};

}  // namespace spfa
