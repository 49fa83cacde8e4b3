#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tlra/fro_lra.hpp"
#include "tlra/sampling.hpp"
#include "tlra/sketch.hpp"

namespace tlra {

struct L1RowResult {
  Vector x;
  double objective = 0.0;  // ||B^T x - c||_1 at the returned x
  /// Smoothed objective sum_j sqrt(r_j^2 + delta_t^2) after each reweighted solve.
  std::vector<double> smoothed;
};

/// min_x ||Bt x - c||_1 by iteratively reweighted least squares with a
/// smoothing parameter shrinking to 1e-8 of the data scale. One column uses
/// the exact weighted median instead.
L1RowResult l1_regression_row(const Matrix& bt, const Vector& c, int iters = 50);

struct L1RegressionResult {
  Matrix W;
  double objective = 0.0;  // ||W B - C||_1
};

/// min_W ||W B - C||_1 for B k x m and C d x m, one independent row problem per row of C.
L1RegressionResult l1_regression(const Matrix& b, const Matrix& c, int iters = 50);

/// Median of |y|: for y = S x with i.i.d. standard Cauchy rows of S this estimates ||x||_1.
double cauchy_norm_estimate(const Vector& sketched);

/// ceil(4 b ln(b + 1)) rows for an l1 subspace of dimension b.
Index lewis_budget(Index b);

/// l1 Lewis-weight sampling operator with `count` rows (every row once when count >= rows).
SamplingOperator lewis_sample(const Matrix& v, Index count, std::uint64_t seed);

/// Y_t = T_t V_t and C = A(T_1, T_2, T_3) with T_t sampled by the l1 Lewis
/// weights of V_t. `t[m]` = 0 selects lewis_budget(V_m.cols()).
ReducedProblem l1_reduce(const Tensor3& a, const std::array<Matrix, 3>& v, std::array<Index, 3> t, std::uint64_t seed);
/// Same with explicit operators (e.g. SamplingOperator::identity).
ReducedProblem l1_reduce(const Tensor3& a, const std::array<Matrix, 3>& v, const std::array<SamplingOperator, 3>& t);

/// l1 norm of (Y1 X1) ⊗ (Y2 X2) ⊗ (Y3 X3) - C.
double l1_reduced_objective(const ReducedProblem& rp, const std::array<Matrix, 3>& x);

struct L1Params {
  Index k = 1;
  SketchKind sketch = SketchKind::cauchy_dense;
  /// Sketch width per mode; 0 selects ceil(4k ln(k+1)) for the dense Cauchy
  /// sketch and ceil(4k^5) capped at 256 for the sparse one.
  Index s = 0;
  /// Lewis-sample rows for modes 1 and 2; 0 selects lewis_budget(s).
  Index t = 0;
  int trials = 9;
  std::uint64_t seed = 0;
  int irls_iters = 50;

  L1Params resolved() const;
};

struct L1Result {
  FactorTriple factors;
  CostReport cost;
  int best_trial = 0;
  std::vector<double> trial_costs;  // l1 cost of every trial
};

/// Rank s1*s2 bicriteria solution under the entry-wise l1 norm.
L1Result l1_bicriteria(const Tensor3& a, const L1Params& params);

}  // namespace tlra
