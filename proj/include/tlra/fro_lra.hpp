#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tlra/sketch.hpp"
#include "tlra/tensor.hpp"

namespace tlra {

enum class RegressionApproach {
  /// TensorSketch the n^2 regression columns (sketched multiple regression).
  sketched,
  /// CountSketch modes 1 and 2 of A and solve the small Kronecker-structured regression.
  reduced,
};

struct AlgoParams {
  Index k = 1;
  double eps = 0.5;
  /// Column sketch width per mode; 0 selects ceil(4k/eps) + 4.
  Index s = 0;
  /// Row reduction width per mode; 0 selects ceil(10 (k/eps)^2). Widths >= n use the identity.
  Index t = 0;
  /// CountSketch width inside the composed column sketch; 0 selects 4 (k^2 + k/eps).
  Index intermediate = 0;
  int trials = 9;
  std::uint64_t seed = 0;
  RegressionApproach approach = RegressionApproach::reduced;
  /// TensorSketch width for the sketched approach; 0 selects ceil(8 (r + r/eps)) for r regression
  /// columns, or ceil(8 (r^2 + r/eps)) when `quadratic_ts_dim` is set.
  Index ts_dim = 0;
  bool quadratic_ts_dim = false;
  int als_restarts = 8;
  int als_sweeps = 300;
  /// Hash and sign independence of the column sketches; 0 selects 2k + 2.
  int w1 = 0;
  /// Hash and sign independence of the row reductions.
  int w2 = 4;

  /// Clamps eps into (0,1) (with a warning) and fills in every 0 default. Throws InvalidParams.
  AlgoParams resolved() const;
  Index reduction_dim(Index n) const { return t >= n ? n : t; }
};

/// The three column sketches S_i (n^2 -> s) and row reductions T_i (n -> t) of one trial.
struct PipelineSketches {
  std::array<SketchSpec, 3> S;
  std::array<SketchSpec, 3> T;
};

/// Sketch descriptions for one trial; identical inputs give identical sketches,
/// which is what lets the streaming and distributed paths match the offline one.
PipelineSketches make_pipeline_sketches(Dims dims, const AlgoParams& resolved, std::uint64_t trial_seed);
std::uint64_t trial_seed(std::uint64_t root, int trial);

/// A_i S_i for mode i (1-based), touching each nonzero of A once in the hashing stage.
Matrix sketch_flattening(const Tensor3& a, int mode, const SketchOp& s);

struct ReducedProblem {
  std::array<Matrix, 3> Y;  // Y_i = T_i V_i
  Tensor3 C;                // A(T_1, T_2, T_3)
};

ReducedProblem reduce_problem(const Tensor3& a, const std::array<Matrix, 3>& v, const std::array<SketchSpec, 3>& t);
ReducedProblem reduce_problem(const Tensor3& a, const std::array<Matrix, 3>& v, Index t, std::uint64_t seed);

/// Value of ||(Y1 X1) ⊗ (Y2 X2) ⊗ (Y3 X3) - C||_F^2.
double reduced_objective(const ReducedProblem& rp, const std::array<Matrix, 3>& x);

struct AlsResult {
  std::array<Matrix, 3> X;
  double objective = 0.0;
  /// Objective after every factor update of the best restart.
  std::vector<double> trace;
  int best_restart = 0;
};

/// Alternating least squares on the reduced objective. A heuristic: no
/// approximation guarantee is claimed for this inner solve.
AlsResult rank_k_als(const ReducedProblem& rp, Index k, int restarts, int sweeps, std::uint64_t seed);

/// W = (A S)(B S)^+ for B = U^T ⊙ V^T and a TensorSketch S of width m
/// (0 selects ceil(8 (k^2 + k/eps)); widths >= n_a n_b solve exactly).
Matrix tensor_multiple_regression(const Matrix& aflat, const Matrix& u, const Matrix& v, double eps,
                                  std::uint64_t seed, Index m = 0);

struct FroResult {
  FactorTriple factors;
  CostReport cost;
  int best_trial = 0;
  std::vector<double> trial_costs;  // squared Frobenius cost of every trial
};

/// Bicriteria solution of rank s1*s2: U-hat repeats A1S1, V-hat repeats each column of A2S2.
FroResult bicriteria_quadratic(const Tensor3& a, const AlgoParams& params);

struct CubicResult {
  /// alpha(A1S1, A2S2, A3S3) with core alpha of size s1 x s2 x s3.
  TuckerForm tucker;
  CostReport cost;
  int best_trial = 0;
  std::vector<double> trial_costs;

  Index rank() const { return tucker.core.dims().size(); }
  FactorTriple expanded() const { return tucker.expand(); }
  /// Same tensor with s1*s2 terms.
  FactorTriple compressed() const { return tucker.compress(); }
};

/// Bicriteria solution of rank s1*s2*s3 from the coefficient regression over all
/// products of sketched columns.
CubicResult bicriteria_cubic(const Tensor3& a, const AlgoParams& params);
/// One trial of the cubic solver from precomputed V_i = A_i S_i and a reduced problem.
TuckerForm cubic_from_reduced(const std::array<Matrix, 3>& v, const ReducedProblem& rp);

/// Rank-k factors through sketching, reduction and ALS on the small problem.
FroResult fro_rank_k(const Tensor3& a, const AlgoParams& params);
/// Factors V_i X_i from an ALS solution.
FactorTriple expand_rank_k(const std::array<Matrix, 3>& v, const std::array<Matrix, 3>& x);

/// ALS on one trial's reduced problem with the seed that trial would use offline.
AlsResult rank_k_for_trial(const ReducedProblem& rp, const AlgoParams& resolved, std::uint64_t trial_seed);

}  // namespace tlra
