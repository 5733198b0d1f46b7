#include "spfa/random.hpp"

#include <cmath>
#include <numbers>

namespace spfa {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

double NormalGenerator::uniform() {
  // (k + 1) / 2^53 keeps log() finite.
  return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
}

double NormalGenerator::next() {
  if (has_mate_) {
    has_mate_ = false;
    return mate_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  mate_ = radius * std::sin(angle);
  has_mate_ = true;
  return radius * std::cos(angle);
}

}  // namespace spfa
