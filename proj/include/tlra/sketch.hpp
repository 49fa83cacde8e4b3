#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tlra/common.hpp"
#include "tlra/random.hpp"
#include "tlra/tensor.hpp"

namespace tlra {

enum class SketchKind { countsketch, gaussian, composed, tensorsketch, cauchy_dense, cauchy_sparse, identity };

std::string to_string(SketchKind k);
SketchKind sketch_kind_from_string(const std::string& s);

/// Seeded description of a linear map Pi: R^input_dim -> R^output_dim.
/// Everything about the realized operator is a function of these fields.
struct SketchSpec {
  SketchKind kind = SketchKind::countsketch;
  Index input_dim = 0;
  Index output_dim = 0;
  std::uint64_t seed = 0;
  int hash_independence = 3;
  int sign_independence = 4;
  /// NaN selects the kind's default (1 for hashing and Cauchy sketches,
  /// 1/sqrt(output_dim) for Gaussian ones).
  double scale = std::numeric_limits<double>::quiet_NaN();
  /// CountSketch width of the first stage of a composed sketch; 0 picks input_dim capped at 4*output_dim^2.
  Index intermediate_dim = 0;
  /// tensorsketch only: input_dim must equal the product.
  std::vector<Index> factor_dims;

  // Test hooks: fix the hash table / sign table of a countsketch.
  std::vector<Index> forced_buckets;
  std::vector<double> forced_signs;
};

/// q-fold TensorSketch over a product domain [n_1] x ... x [n_q].
class TensorSketchOp {
 public:
  TensorSketchOp() = default;
  TensorSketchOp(std::vector<Index> factor_dims, Index m, std::uint64_t seed, int hash_independence = 3,
                 int sign_independence = 4);

  Index output_dim() const { return m_; }
  Index input_dim() const;
  const std::vector<Index>& factor_dims() const { return dims_; }

  Index factor_bucket(std::size_t t, Index i) const { return h_[t][static_cast<std::size_t>(i)]; }
  double factor_sign(std::size_t t, Index i) const { return s_[t][static_cast<std::size_t>(i)]; }
  /// Induced hash and sign of a product-domain coordinate, first factor slowest.
  Index bucket(Index c) const;
  double sign(Index c) const;

  /// (U_1 ⊙ ... ⊙ U_q) S computed row by row with FFTs; k x m.
  Matrix apply_kr(const ImplicitKR& k) const;
  /// M S for M with prod(n_t) columns; touches each nonzero once.
  Matrix apply_rows(const Matrix& m) const;
  Matrix apply_rows(const SparseMatrix& m) const;

 private:
  std::vector<Index> dims_;
  Index m_ = 0;
  std::vector<std::vector<Index>> h_;
  std::vector<std::vector<double>> s_;
};

/// Realized sketch: Pi is output_dim x input_dim.
class SketchOp {
 public:
  /// With `realize` false no tables are stored: entry(), bucket() and weight()
  /// are recomputed from the seed on every call and the apply functions throw.
  explicit SketchOp(SketchSpec spec, bool realize = true);

  const SketchSpec& spec() const { return spec_; }
  Index input_dim() const { return spec_.input_dim; }
  Index output_dim() const { return spec_.output_dim; }
  double scale() const { return scale_; }

  /// Pi(out, in), regenerated from the seed.
  double entry(Index out, Index in) const;

  /// Pi M (M has input_dim rows).
  Matrix apply_left(const Matrix& m) const;
  Matrix apply_left(const SparseMatrix& m) const;
  /// M Pi^T (M has input_dim columns).
  Matrix apply_right(const Matrix& m) const;
  Matrix apply_right(const SparseMatrix& m) const;

  /// Pi^T as an input_dim x output_dim operator, for mode_apply.
  ModeOp mode_op() const;
  Matrix dense() const;

  // Structure of hashing sketches (countsketch, cauchy_sparse, tensorsketch, and
  // the first stage of composed).
  bool is_hashing() const;
  Index bucket(Index in) const;
  double weight(Index in) const;

 private:
  SketchSpec spec_;
  double scale_ = 1.0;
  Index mid_ = 0;  // composed intermediate width
  PolyHash hash_, sign_;
  std::uint64_t value_seed_ = 0;
  std::vector<Index> buckets_;
  std::vector<double> weights_;
  Matrix dense_;  // gaussian / cauchy_dense: output x input; composed: output x mid
  TensorSketchOp ts_;
  bool realized_ = true;

  Index raw_bucket(Index in) const;
  double raw_weight(Index in) const;
  double raw_dense(Index out, Index col) const;
  void require_realized() const;

  Index hash_width() const { return spec_.kind == SketchKind::composed ? mid_ : spec_.output_dim; }
  Matrix hash_left(const Matrix& m) const;
  Matrix hash_left(const SparseMatrix& m) const;
  Matrix hash_right(const Matrix& m) const;
  Matrix hash_right(const SparseMatrix& m) const;
};

Matrix sketch_apply_right(const Matrix& m, const SketchSpec& s);
Matrix sketch_apply_left(const SketchSpec& s, const Matrix& m);
Matrix tensorsketch_apply_kr(const ImplicitKR& k, const TensorSketchOp& ts);
Matrix tensorsketch_apply_rows(const Matrix& m, const TensorSketchOp& ts);

/// Target dimension (2 + 3^q) / (eps^2 delta) for approximate matrix product.
Index amp_sketch_dim(int q, double eps, double delta);

}  // namespace tlra
