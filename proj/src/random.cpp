#include "tlra/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tlra/common.hpp"

namespace tlra {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) {
  return splitmix64(splitmix64(parent) ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

double counter_u01(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t bits = splitmix64(seed ^ splitmix64(counter));
  // 53 random bits, shifted by half an ulp so the result is never 0 or 1.
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double counter_normal(std::uint64_t seed, std::uint64_t counter) {
  double u1 = counter_u01(seed, 2 * counter);
  double u2 = counter_u01(seed, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double counter_cauchy(std::uint64_t seed, std::uint64_t counter) {
  return std::tan(std::numbers::pi * (counter_u01(seed, counter) - 0.5));
}

namespace {

std::uint64_t mulmod61(std::uint64_t a, std::uint64_t b) {
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  std::uint64_t lo = static_cast<std::uint64_t>(p & PolyHash::kPrime);
  std::uint64_t hi = static_cast<std::uint64_t>(p >> 61);
  std::uint64_t r = lo + hi;
  return r >= PolyHash::kPrime ? r - PolyHash::kPrime : r;
}

}  // namespace

PolyHash::PolyHash(std::uint64_t seed, int degree) {
  if (degree < 1) throw InvalidParams("hash independence degree must be >= 1");
  coeffs_.resize(static_cast<std::size_t>(degree));
  std::uint64_t state = seed;
  for (auto& c : coeffs_) {
    do {
      state = splitmix64(state);
      c = state >> 3;  // 61 bits
    } while (c >= kPrime);
  }
}

std::uint64_t PolyHash::eval(std::uint64_t x) const {
  std::uint64_t xm = x % kPrime;
  std::uint64_t acc = 0;
  for (std::uint64_t c : coeffs_) {
    acc = mulmod61(acc, xm) + c;
    if (acc >= kPrime) acc -= kPrime;
  }
  return acc;
}

double Rng::uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw InvalidParams("Rng::below(0)");
  auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  return std::min(k, n - 1);
}

DiscreteSampler::DiscreteSampler(const std::vector<double>& weights) {
  cdf_.resize(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
      throw DegenerateInputError("sampling weights must be finite and nonnegative");
    acc += weights[i];
    cdf_[i] = acc;
  }
  total_ = acc;
  if (!(total_ > 0.0)) throw DegenerateInputError("sampling weights are all zero");
}

std::size_t DiscreteSampler::draw(double u) const {
  double target = u * total_;
  // First index whose cumulative weight exceeds the target; zero-weight slots
  // can never be selected and ties resolve to the lowest index.
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
  if (it == cdf_.end()) --it;
  auto idx = static_cast<std::size_t>(it - cdf_.begin());
  // Rounding can push the target past the end; skip any zero-weight tail.
  while (idx > 0 && cdf_[idx] == cdf_[idx - 1]) --idx;
  return idx;
}

}  // namespace tlra
