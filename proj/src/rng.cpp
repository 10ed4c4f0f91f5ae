#include "voxreg/rng.hpp"

#include <cmath>

#include "voxreg/errors.hpp"

namespace vxr {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& w : state_) w = splitmix64(s);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t lane) {
  // Mix (seed, tag, lane) through splitmix so nearby lanes get unrelated states.
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s = h ^ (tag * 0x9e3779b97f4a7c15ULL);
  h = splitmix64(s);
  s = h ^ (lane * 0xd1342543de82ef95ULL);
  Rng rng(0);
  for (auto& w : rng.state_) w = splitmix64(s);
  rng.has_spare_ = false;
  return rng;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t lane) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s = h ^ (tag * 0x9e3779b97f4a7c15ULL);
  h = splitmix64(s);
  s = h ^ (lane * 0xd1342543de82ef95ULL);
  return splitmix64(s);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_below(std::uint64_t n) {
  if (n == 0) fail_validation("invalid-parameter", "uniform_below(0)");
  const std::uint64_t threshold = (0 - n) % n;  // rejection bound for unbiased draw
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) fail_validation("invalid-parameter", "gamma shape must be positive");
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a+1) * U^{1/a}
    const double u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Rng::inv_gamma(double shape, double scale) {
  if (!(scale > 0.0)) fail_validation("invalid-parameter", "inv_gamma scale must be positive");
  // IG(shape, scale) = scale / Gamma(shape, rate 1)
  return scale / gamma(shape);
}

}  // namespace vxr
