#pragma once

#include <variant>
#include <vector>

#include "tlra/common.hpp"

namespace tlra {

struct Dims {
  Index n1 = 0, n2 = 0, n3 = 0;

  Index size() const { return n1 * n2 * n3; }
  Index operator[](int mode) const { return mode == 1 ? n1 : mode == 2 ? n2 : n3; }
  bool operator==(const Dims&) const = default;
};

/// One stored coordinate of a sparse tensor, 0-based.
struct Entry {
  Index i = 0, j = 0, l = 0;
  double value = 0.0;
};

/// Third-order tensor, stored densely (row-major, l fastest) or as a sorted
/// coordinate list without duplicates or explicit zeros.
class Tensor3 {
 public:
  Tensor3() = default;

  static Tensor3 zeros(Dims dims);
  static Tensor3 from_dense(Dims dims, std::vector<double> values);
  /// Duplicates are summed and resulting zeros dropped.
  static Tensor3 from_entries(Dims dims, std::vector<Entry> entries);

  Dims dims() const { return dims_; }
  bool is_sparse() const { return sparse_; }
  /// Stored nonzero count (dense tensors count nonzero values).
  Index nnz() const;

  double operator()(Index i, Index j, Index l) const;
  /// Dense storage only.
  double& at(Index i, Index j, Index l) { return values_[offset(i, j, l)]; }
  Index offset(Index i, Index j, Index l) const { return (i * dims_.n2 + j) * dims_.n3 + l; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  const std::vector<Entry>& entries() const { return entries_; }

  Tensor3 to_dense() const;
  Tensor3 to_sparse() const;

  double fro_norm2() const;
  double fro_norm() const;
  double l1_norm() const;

  /// Visits every nonzero as f(i, j, l, value) in (i, j, l) lexicographic order.
  template <class F>
  void for_each_nonzero(F&& f) const {
    if (sparse_) {
      for (const Entry& e : entries_) f(e.i, e.j, e.l, e.value);
      return;
    }
    Index p = 0;
    for (Index i = 0; i < dims_.n1; ++i)
      for (Index j = 0; j < dims_.n2; ++j)
        for (Index l = 0; l < dims_.n3; ++l, ++p)
          if (values_[static_cast<std::size_t>(p)] != 0.0) f(i, j, l, values_[static_cast<std::size_t>(p)]);
  }

 private:
  Dims dims_;
  bool sparse_ = false;
  std::vector<double> values_;
  std::vector<Entry> entries_;
};

Tensor3 operator+(const Tensor3& a, const Tensor3& b);
Tensor3 operator-(const Tensor3& a, const Tensor3& b);
Tensor3 operator*(double s, const Tensor3& a);

/// Mode-t flattening: mode 1 puts (i, j*n3+l), mode 2 (j, l*n1+i), mode 3 (l, i*n2+j).
Matrix flatten(const Tensor3& t, int mode);
SparseMatrix flatten_sparse(const Tensor3& t, int mode);
/// Inverse of flatten. Throws ShapeError when `m` does not fit `dims`.
Tensor3 retensorize(const Matrix& m, int mode, Dims dims);

/// Column index of (a, b, c) in the mode-t flattening.
Index flat_col(Dims d, int mode, Index i, Index j, Index l);

/// Linear operator for one mode of mode_apply: n_in x n_out, or identity.
class ModeOp {
 public:
  ModeOp() = default;
  ModeOp(Matrix m) : op_(std::move(m)) {}           // NOLINT(implicit)
  ModeOp(SparseMatrix m) : op_(std::move(m)) {}     // NOLINT(implicit)

  bool is_identity() const { return std::holds_alternative<std::monostate>(op_); }
  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(op_); }
  Index rows(Index n_if_identity) const;
  Index cols(Index n_if_identity) const;
  const Matrix& dense() const { return std::get<Matrix>(op_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(op_); }
  Matrix to_dense(Index n_if_identity) const;

 private:
  std::variant<std::monostate, Matrix, SparseMatrix> op_;
};

/// out(i,j,l) = sum_{a,b,c} T(a,b,c) B1(a,i) B2(b,j) B3(c,l).
Tensor3 mode_apply(const Tensor3& t, const ModeOp& b1, const ModeOp& b2, const ModeOp& b3);

/// Factor matrices k x n_t whose logical row i is vec(row_i(F_1) x ... x row_i(F_q)),
/// first factor slowest.
struct ImplicitKR {
  std::vector<Matrix> factors;

  Index rows() const;
  Index cols() const;
  Vector row(Index i) const;
  Matrix materialize() const;
};

Vector kr_row(const ImplicitKR& k, Index i);

/// Sum_r U_r x V_r x W_r.
struct FactorTriple {
  Matrix U, V, W;

  Index rank() const { return U.cols(); }
  Dims dims() const { return {U.rows(), V.rows(), W.rows()}; }
  static FactorTriple zeros(Dims d, Index r);
  void check() const;
};

Tensor3 eval_factors(const FactorTriple& f);

struct CostReport {
  double fro2 = 0.0;
  double l1 = 0.0;
  double fro() const;
};

/// Residual of a factored approximation, evaluated one mode-1 slice at a time.
CostReport residual_cost(const Tensor3& t, const FactorTriple& f);
/// ||T - F||_F^2 from Gram matrices and a pass over the nonzeros of T;
/// never forms any slice of F.
double residual_fro2_gram(const Tensor3& t, const FactorTriple& f);

/// core(P^T, Q^T, R^T): a Tucker-form tensor with factor matrices n_t x s_t.
struct TuckerForm {
  Tensor3 core;
  Matrix P, Q, R;

  Dims dims() const { return {P.rows(), Q.rows(), R.rows()}; }
  /// Equivalent CP form with s1*s2*s3 terms.
  FactorTriple expand() const;
  /// Equivalent CP form with s1*s2 terms (third factor absorbs the core).
  FactorTriple compress() const;
};

CostReport residual_cost(const Tensor3& t, const TuckerForm& f);

}  // namespace tlra
