#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tlra/sampling.hpp"
#include "tlra/tensor.hpp"

namespace tlra {

/// Mode-t fibers of `a` at the selected flattening columns, scaled by the operator weights
/// (mode 1: columns A(:, j, l); mode 2: rows A(i, :, l); mode 3: tubes A(i, j, :)).
Matrix gather_fibers(const Tensor3& a, int mode, const SamplingOperator& sel, bool weighted = true);

/// ceil(c (k ln k + k/eps)): the leverage-sampling budget for a rank-k subspace.
Index leverage_budget(double k, double eps, double c = 4.0);

// ---------------------------------------------------------------- selection without a core

struct CrtParams {
  Index k = 1;
  double eps = 0.5;
  /// Gaussian sketch width for modes 1 and 2; 0 selects ceil(4k/eps) + 4.
  Index s = 0;
  double c = 4.0;
  /// Upper bound on every sample count; 0 means the flattening width. A count
  /// reaching the width keeps every column instead of sampling.
  Index cap = 0;
  std::uint64_t seed = 0;
};

struct CrtSelection {
  SamplingOperator cols, rows, tubes;  // over the mode-1, mode-2, mode-3 flattening columns
  Matrix C, R, T;                      // weighted fibers
  /// Uncapped budget for each mode, in mode order.
  std::array<Index, 3> budget{};
  std::array<bool, 3> capped{};
};

/// Tubes first from the product of the leverage distributions of A1 S1 and A2 S2,
/// then rows, then columns, each stage conditioning on the fibers already chosen.
CrtSelection crt_select(const Tensor3& a, const CrtParams& params);

/// Best Tucker fit over span(C) x span(R) x span(T): the projection of A onto
/// that product subspace, returned with its cost.
struct CrtFit {
  TuckerForm tucker;
  CostReport cost;
};
CrtFit crt_fit(const Tensor3& a, const Matrix& c, const Matrix& r, const Matrix& t);

// ---------------------------------------------------------------- CURT

struct CurtParams {
  double eps = 0.5;
  double c = 4.0;
  /// Fibers per mode; 0 selects leverage_budget(k, eps, c).
  Index d = 0;
  int trials = 9;
  std::uint64_t seed = 0;
  double eps0 = 0.01;  // Khatri-Rao sampler accuracy
};

struct CurtResult {
  SamplingOperator cols, rows, tubes;
  Matrix C, R, T;     // n1 x c, n2 x r, n3 x t weighted fibers
  Matrix P1, P2, P3;  // c x k, r x k, t x k; core = sum_i (P1)_i x (P2)_i x (P3)_i
  CostReport cost;
  int best_trial = 0;
  std::vector<double> trial_costs;

  FactorTriple factors() const { return {C * P1, R * P2, T * P3}; }
};

/// CURT decomposition seeded by a rank-k factorization `f` of (an approximation to) `a`.
CurtResult curt_decompose(const Tensor3& a, const FactorTriple& f, const CurtParams& params);

// ---------------------------------------------------------------- matrix CUR

struct CurResult {
  SamplingOperator cols, rows;
  Matrix C;  // m x c weighted columns of M
  Matrix U;  // c x r, rank <= k
  Matrix R;  // r x n weighted rows of M
  double cost = 0.0;  // ||C U R - M||_F^2
};

/// Rows R of M and Y (k x r) with C Y R close to the best fit C X of M.
/// `r` = 0 selects leverage_budget(k, eps) for k = C.cols().
struct RowSubset {
  SamplingOperator rows;
  Matrix R;
  Matrix Y;
};
RowSubset generalized_row_subset(const Matrix& m, const Matrix& c, double eps, std::uint64_t seed, Index r = 0);

CurResult matrix_cur(const Matrix& m, Index k, double eps, std::uint64_t seed);

}  // namespace tlra
