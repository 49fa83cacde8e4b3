#pragma once

#include <cstdint>

#include "tlra/tensor.hpp"

namespace tlra {

/// A synthetic tensor built as a known low-rank part plus a perturbation.
struct PlantedTensor {
  Tensor3 tensor;        // low_rank + perturbation
  FactorTriple factors;  // generates the low-rank part
  Tensor3 perturbation;
};

/// Gaussian rank-k factors plus dense Gaussian noise scaled so that
/// ||noise||_F = noise_ratio * ||low-rank part||_F.
PlantedTensor planted_gaussian(Dims dims, Index k, double noise_ratio, std::uint64_t seed);

/// Gaussian rank-k factors plus `fraction` of entries hit by +-magnitude outliers.
PlantedTensor planted_outliers(Dims dims, Index k, double fraction, double magnitude, std::uint64_t seed);

struct PlantedMatrix {
  Matrix matrix;
  Matrix low_rank;
  Matrix noise;
};

/// Gaussian rank-k matrix plus Gaussian noise with ||noise||_F = noise_ratio * ||low-rank||_F.
PlantedMatrix planted_matrix(Index rows, Index cols, Index k, double noise_ratio, std::uint64_t seed);

}  // namespace tlra
