#pragma once

#include <cstdint>
#include <vector>

#include "tlra/common.hpp"
#include "tlra/random.hpp"
#include "tlra/tensor.hpp"

namespace tlra {

/// Diagonal sampling-and-rescaling matrix kept as (index, weight) pairs.
/// Draws with replacement, so an index may appear more than once.
struct SamplingOperator {
  std::vector<Index> indices;
  std::vector<double> weights;
  Index source_dim = 0;

  Index count() const { return static_cast<Index>(indices.size()); }
  /// Row r of the result is weights[r] * m.row(indices[r]).
  Matrix select_rows(const Matrix& m) const;
  Matrix select_cols(const Matrix& m) const;
  /// Same selection without the rescaling.
  Matrix raw_rows(const Matrix& m) const;
  Matrix raw_cols(const Matrix& m) const;
  /// source_dim x count operator with entry (indices[r], r) = weights[r].
  SparseMatrix matrix() const;
  ModeOp mode_op() const { return ModeOp(matrix()); }
  static SamplingOperator identity(Index n);
};

/// Squared row norms of an orthonormal basis for the column space.
Vector leverage_scores(const Matrix& m);

/// I.i.d. draws proportional to `probs`; draw i is rescaled by (count * q_i)^(-1/p),
/// which is 1/sqrt(q_i count) for p = 2.
SamplingOperator sample_operator(const Vector& probs, Index count, std::uint64_t seed, double p = 2.0);

struct LewisResult {
  Vector weights;
  /// max_i |w_i - tau_i(W^(1/2-1/p) M)| after the last iteration.
  double residual = 0.0;
  int iterations = 0;
};

/// l_p Lewis weights by the fixed-point iteration w_i <- (m_i^T (M^T W^(1-2/p) M)^+ m_i)^(p/2).
LewisResult lewis_weights(const Matrix& m, double p, int iters = 40);

struct KrSamplerOptions {
  double eps0 = 0.01;
  /// TensorSketch width for every stage; 0 picks max(64 ln N, k^2 (2+3^q) / eps0) capped at 2^16.
  Index sketch_dim = 0;
};

/// Draws columns of U_1 ⊙ ... ⊙ U_q (each U_t is k x n_t) approximately in
/// proportion to their leverage scores, one mode index at a time, without
/// forming the k x prod(n_t) matrix.
class KrLeverageSampler {
 public:
  KrLeverageSampler(std::vector<Matrix> factors, std::uint64_t seed, KrSamplerOptions opts = {});

  Index domain_size() const { return domain_; }
  /// Column index in the Khatri-Rao ordering (first factor slowest).
  Index draw(Rng& rng) const;
  /// Probability that draw() returns `col`.
  double probability(Index col) const;
  SamplingOperator sample(Index count, Rng& rng) const;

  /// Whether stage t (0 = row of the whitening matrix) used a sketch or exact Grams.
  const std::vector<bool>& sketched_stages() const { return sketched_; }

 private:
  std::vector<Matrix> factors_;
  std::vector<Matrix> grams_;   // U_t U_t^T
  Matrix whiten_;               // r x k
  Vector alpha_;                // first-stage masses
  std::vector<Matrix> suffix_;  // suffix_[l]: Gram estimate of U_{l+1} ⊙ ... ⊙ U_q, l = 1..q (last is all ones)
  Index domain_ = 1;
  std::vector<bool> sketched_;

  Vector stage_masses(std::size_t l, const Vector& prefix) const;
};

SamplingOperator kr_leverage_sample(const std::vector<Matrix>& factors, Index count, std::uint64_t seed,
                                    double eps0 = 0.01);

}  // namespace tlra
