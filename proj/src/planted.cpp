#include "tlra/planted.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "tlra/random.hpp"

namespace tlra {

namespace {

Matrix gaussian(Index r, Index c, Rng& rng) {
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

void check(Index k, double ratio) {
  if (k < 0) throw InvalidParams("planted rank must be >= 0");
  if (!(ratio >= 0.0)) throw InvalidParams("noise ratio must be >= 0");
}

}  // namespace

PlantedTensor planted_gaussian(Dims dims, Index k, double noise_ratio, std::uint64_t seed) {
  check(k, noise_ratio);
  Rng rng(seed);
  PlantedTensor p;
  p.factors = {gaussian(dims.n1, k, rng), gaussian(dims.n2, k, rng), gaussian(dims.n3, k, rng)};
  Tensor3 low = eval_factors(p.factors);
  std::vector<double> e(static_cast<std::size_t>(dims.size()));
  for (double& x : e) x = rng.normal();
  Tensor3 noise = Tensor3::from_dense(dims, std::move(e));
  double target = noise_ratio * low.fro_norm(), have = noise.fro_norm();
  p.perturbation = (have > 0.0 ? target / have : 0.0) * noise;
  p.tensor = low + p.perturbation;
  return p;
}

PlantedTensor planted_outliers(Dims dims, Index k, double fraction, double magnitude, std::uint64_t seed) {
  check(k, 0.0);
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidParams("outlier fraction must be in [0,1]");
  Rng rng(seed);
  PlantedTensor p;
  p.factors = {gaussian(dims.n1, k, rng), gaussian(dims.n2, k, rng), gaussian(dims.n3, k, rng)};
  Tensor3 low = eval_factors(p.factors);
  auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dims.size())));
  // Partial Fisher-Yates over linear offsets picks distinct positions.
  std::vector<Index> pos(static_cast<std::size_t>(dims.size()));
  std::iota(pos.begin(), pos.end(), Index{0});
  Tensor3 out = Tensor3::zeros(dims);
  for (std::size_t r = 0; r < count; ++r) {
    auto j = r + static_cast<std::size_t>(rng.below(pos.size() - r));
    std::swap(pos[r], pos[j]);
    out.values()[static_cast<std::size_t>(pos[r])] = rng.uniform() < 0.5 ? -magnitude : magnitude;
  }
  p.perturbation = out.to_sparse();
  p.tensor = low + out;
  return p;
}

PlantedMatrix planted_matrix(Index rows, Index cols, Index k, double noise_ratio, std::uint64_t seed) {
  check(k, noise_ratio);
  Rng rng(seed);
  PlantedMatrix p;
  p.low_rank = gaussian(rows, k, rng) * gaussian(k, cols, rng);
  Matrix e = gaussian(rows, cols, rng);
  double have = e.norm();
  p.noise = have > 0.0 ? Matrix(e * (noise_ratio * p.low_rank.norm() / have)) : e;
  p.matrix = p.low_rank + p.noise;
  return p;
}

}  // namespace tlra
