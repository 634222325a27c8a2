/**
 * @file common.cpp
 * @brief Angle wrapping and seed derivation.
 */
#include "risloc/common.hpp"

#include <cmath>

namespace risloc {

double wrap_angle(double theta) {
  double w = std::remainder(theta, 2.0 * kPi);  // in [-pi, pi]
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

namespace {
std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ a);
  h = splitmix(h ^ (b + 0x632BE59BD9B4E019ULL));
  h = splitmix(h ^ (c + 0x8CB92BA72F3D8DD7ULL));
  return h;
}

}  // namespace risloc
