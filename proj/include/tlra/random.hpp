#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tlra {

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent child seed from a parent seed and a tag.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag);

// Counter-based draws: the value depends only on (seed, counter), so any entry
// of a random matrix can be regenerated on demand without storing it.
double counter_u01(std::uint64_t seed, std::uint64_t counter);  // in (0,1)
double counter_normal(std::uint64_t seed, std::uint64_t counter);
double counter_cauchy(std::uint64_t seed, std::uint64_t counter);

/// w-wise independent polynomial hash family over the Mersenne prime 2^61-1.
class PolyHash {
 public:
  static constexpr std::uint64_t kPrime = (std::uint64_t{1} << 61) - 1;

  PolyHash() = default;
  PolyHash(std::uint64_t seed, int degree);

  std::uint64_t eval(std::uint64_t x) const;
  std::uint64_t bucket(std::uint64_t x, std::uint64_t m) const { return eval(x) % m; }
  double sign(std::uint64_t x) const { return (eval(x) & 1U) ? -1.0 : 1.0; }
  int degree() const { return static_cast<int>(coeffs_.size()); }

 private:
  std::vector<std::uint64_t> coeffs_;
};

/// Sequential generator with platform-independent transforms on top of mt19937_64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform();  // in [0,1)
  double normal();
  std::uint64_t next() { return eng_(); }
  /// Index in [0,n) drawn uniformly.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Cumulative-sum sampler; draws i with probability w_i / sum(w).
class DiscreteSampler {
 public:
  explicit DiscreteSampler(const std::vector<double>& weights);
  std::size_t draw(double u) const;  // u in [0,1)
  double total() const { return total_; }

 private:
  std::vector<double> cdf_;
  double total_ = 0.0;
};

}  // namespace tlra
