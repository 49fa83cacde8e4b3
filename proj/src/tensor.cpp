#include "tlra/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tlra {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_dims(Dims d) {
  if (d.n1 < 0 || d.n2 < 0 || d.n3 < 0) throw ShapeError("tensor dimensions must be nonnegative");
}

void check_mode(int mode) {
  if (mode < 1 || mode > 3) throw ShapeError("mode must be 1, 2 or 3, got " + std::to_string(mode));
}

bool entry_less(const Entry& a, const Entry& b) {
  if (a.i != b.i) return a.i < b.i;
  if (a.j != b.j) return a.j < b.j;
  return a.l < b.l;
}

bool same_pos(const Entry& a, const Entry& b) { return a.i == b.i && a.j == b.j && a.l == b.l; }

// Iterates the nonzeros of row `a` of a mode operator as f(column, weight).
template <class F>
void for_op_row(const ModeOp& op, Index a, F&& f) {
  if (op.is_identity()) {
    f(a, 1.0);
  } else if (op.is_sparse()) {
    for (SparseMatrix::InnerIterator it(op.sparse(), a); it; ++it) f(it.col(), it.value());
  } else {
    const Matrix& m = op.dense();
    for (Index c = 0; c < m.cols(); ++c)
      if (m(a, c) != 0.0) f(c, m(a, c));
  }
}

double op_fanout(const ModeOp& op, Index n) {
  if (op.is_identity()) return 1.0;
  if (op.is_sparse()) return n ? static_cast<double>(op.sparse().nonZeros()) / static_cast<double>(n) : 0.0;
  return static_cast<double>(op.dense().cols());
}

// Dense mode-1 product on a row-major buffer laid out n1 x (rest).
std::vector<double> apply_mode1(const std::vector<double>& x, Index n1, Index rest, const ModeOp& op) {
  Eigen::Map<const RowMajorMatrix> xm(x.data(), n1, rest);
  RowMajorMatrix out;
  if (op.is_sparse())
    out = op.sparse().transpose() * xm;
  else
    out = op.dense().transpose() * xm;
  return {out.data(), out.data() + out.size()};
}

std::vector<double> apply_mode3(const std::vector<double>& x, Index lead, Index n3, const ModeOp& op) {
  Eigen::Map<const RowMajorMatrix> xm(x.data(), lead, n3);
  RowMajorMatrix out;
  if (op.is_sparse())
    out = xm * op.sparse();
  else
    out = xm * op.dense();
  return {out.data(), out.data() + out.size()};
}

std::vector<double> apply_mode2(const std::vector<double>& x, Index n1, Index n2, Index n3, const ModeOp& op) {
  Index d2 = op.cols(n2);
  std::vector<double> out(static_cast<std::size_t>(n1 * d2 * n3));
  for (Index i = 0; i < n1; ++i) {
    Eigen::Map<const RowMajorMatrix> slice(x.data() + i * n2 * n3, n2, n3);
    Eigen::Map<RowMajorMatrix> dst(out.data() + i * d2 * n3, d2, n3);
    if (op.is_sparse())
      dst = op.sparse().transpose() * slice;
    else
      dst = op.dense().transpose() * slice;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- Tensor3

Tensor3 Tensor3::zeros(Dims dims) {
  check_dims(dims);
  Tensor3 t;
  t.dims_ = dims;
  t.values_.assign(static_cast<std::size_t>(dims.size()), 0.0);
  return t;
}

Tensor3 Tensor3::from_dense(Dims dims, std::vector<double> values) {
  check_dims(dims);
  if (static_cast<Index>(values.size()) != dims.size())
    throw ShapeError("dense tensor needs " + std::to_string(dims.size()) + " values, got " +
                     std::to_string(values.size()));
  Tensor3 t;
  t.dims_ = dims;
  t.values_ = std::move(values);
  return t;
}

Tensor3 Tensor3::from_entries(Dims dims, std::vector<Entry> entries) {
  check_dims(dims);
  for (const Entry& e : entries) {
    if (e.i < 0 || e.i >= dims.n1 || e.j < 0 || e.j >= dims.n2 || e.l < 0 || e.l >= dims.n3)
      throw ShapeError("tensor entry (" + std::to_string(e.i + 1) + "," + std::to_string(e.j + 1) + "," +
                       std::to_string(e.l + 1) + ") outside dimensions");
  }
  std::stable_sort(entries.begin(), entries.end(), entry_less);
  std::vector<Entry> merged;
  merged.reserve(entries.size());
  for (const Entry& e : entries) {
    if (!merged.empty() && same_pos(merged.back(), e))
      merged.back().value += e.value;
    else
      merged.push_back(e);
  }
  std::erase_if(merged, [](const Entry& e) { return e.value == 0.0; });
  Tensor3 t;
  t.dims_ = dims;
  t.sparse_ = true;
  t.entries_ = std::move(merged);
  return t;
}

Index Tensor3::nnz() const {
  if (sparse_) return static_cast<Index>(entries_.size());
  return static_cast<Index>(std::count_if(values_.begin(), values_.end(), [](double v) { return v != 0.0; }));
}

double Tensor3::operator()(Index i, Index j, Index l) const {
  if (!sparse_) return values_[static_cast<std::size_t>(offset(i, j, l))];
  Entry key{i, j, l, 0.0};
  auto it = std::lower_bound(entries_.begin(), entries_.end(), key, entry_less);
  return (it != entries_.end() && same_pos(*it, key)) ? it->value : 0.0;
}

Tensor3 Tensor3::to_dense() const {
  if (!sparse_) return *this;
  Tensor3 t = zeros(dims_);
  for (const Entry& e : entries_) t.at(e.i, e.j, e.l) = e.value;
  return t;
}

Tensor3 Tensor3::to_sparse() const {
  if (sparse_) return *this;
  std::vector<Entry> entries;
  for_each_nonzero([&](Index i, Index j, Index l, double v) { entries.push_back({i, j, l, v}); });
  Tensor3 t;
  t.dims_ = dims_;
  t.sparse_ = true;
  t.entries_ = std::move(entries);
  return t;
}

double Tensor3::fro_norm2() const {
  double s = 0.0;
  for_each_nonzero([&](Index, Index, Index, double v) { s += v * v; });
  return s;
}

double Tensor3::fro_norm() const { return std::sqrt(fro_norm2()); }

double Tensor3::l1_norm() const {
  double s = 0.0;
  for_each_nonzero([&](Index, Index, Index, double v) { s += std::abs(v); });
  return s;
}

namespace {

Tensor3 combine(const Tensor3& a, const Tensor3& b, double sb) {
  if (a.dims() != b.dims()) throw ShapeError("tensor dimensions differ");
  if (!a.is_sparse() && !b.is_sparse()) {
    std::vector<double> v = a.values();
    for (std::size_t p = 0; p < v.size(); ++p) v[p] += sb * b.values()[p];
    return Tensor3::from_dense(a.dims(), std::move(v));
  }
  if (!a.is_sparse() || !b.is_sparse()) {
    Tensor3 out = a.to_dense();
    b.for_each_nonzero([&](Index i, Index j, Index l, double v) { out.at(i, j, l) += sb * v; });
    return out;
  }
  std::vector<Entry> e = a.entries();
  e.reserve(e.size() + b.entries().size());
  for (Entry x : b.entries()) {
    x.value *= sb;
    e.push_back(x);
  }
  return Tensor3::from_entries(a.dims(), std::move(e));
}

}  // namespace

Tensor3 operator+(const Tensor3& a, const Tensor3& b) { return combine(a, b, 1.0); }
Tensor3 operator-(const Tensor3& a, const Tensor3& b) { return combine(a, b, -1.0); }

Tensor3 operator*(double s, const Tensor3& a) {
  if (!a.is_sparse()) {
    std::vector<double> v = a.values();
    for (double& x : v) x *= s;
    return Tensor3::from_dense(a.dims(), std::move(v));
  }
  std::vector<Entry> e = a.entries();
  for (Entry& x : e) x.value *= s;
  return Tensor3::from_entries(a.dims(), std::move(e));
}

// ---------------------------------------------------------------- flattenings

Index flat_col(Dims d, int mode, Index i, Index j, Index l) {
  switch (mode) {
    case 1: return j * d.n3 + l;
    case 2: return l * d.n1 + i;
    case 3: return i * d.n2 + j;
    default: check_mode(mode); return 0;
  }
}

static Index flat_row(int mode, Index i, Index j, Index l) { return mode == 1 ? i : mode == 2 ? j : l; }

static std::pair<Index, Index> flat_shape(Dims d, int mode) {
  switch (mode) {
    case 1: return {d.n1, d.n2 * d.n3};
    case 2: return {d.n2, d.n3 * d.n1};
    case 3: return {d.n3, d.n1 * d.n2};
    default: check_mode(mode); return {0, 0};
  }
}

Matrix flatten(const Tensor3& t, int mode) {
  check_mode(mode);
  auto [r, c] = flat_shape(t.dims(), mode);
  Matrix m = Matrix::Zero(r, c);
  Dims d = t.dims();
  t.for_each_nonzero([&](Index i, Index j, Index l, double v) { m(flat_row(mode, i, j, l), flat_col(d, mode, i, j, l)) = v; });
  return m;
}

SparseMatrix flatten_sparse(const Tensor3& t, int mode) {
  check_mode(mode);
  auto [r, c] = flat_shape(t.dims(), mode);
  Dims d = t.dims();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(t.nnz()));
  t.for_each_nonzero([&](Index i, Index j, Index l, double v) {
    trips.emplace_back(flat_row(mode, i, j, l), flat_col(d, mode, i, j, l), v);
  });
  SparseMatrix m(r, c);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

Tensor3 retensorize(const Matrix& m, int mode, Dims dims) {
  check_mode(mode);
  check_dims(dims);
  auto [r, c] = flat_shape(dims, mode);
  if (m.rows() != r || m.cols() != c)
    throw ShapeError("matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " does not match mode-" + std::to_string(mode) + " flattening " + std::to_string(r) + "x" +
                     std::to_string(c));
  Tensor3 t = Tensor3::zeros(dims);
  for (Index i = 0; i < dims.n1; ++i)
    for (Index j = 0; j < dims.n2; ++j)
      for (Index l = 0; l < dims.n3; ++l) t.at(i, j, l) = m(flat_row(mode, i, j, l), flat_col(dims, mode, i, j, l));
  return t;
}

// ---------------------------------------------------------------- mode_apply

Index ModeOp::rows(Index n) const {
  if (is_identity()) return n;
  return is_sparse() ? sparse().rows() : dense().rows();
}

Index ModeOp::cols(Index n) const {
  if (is_identity()) return n;
  return is_sparse() ? sparse().cols() : dense().cols();
}

Matrix ModeOp::to_dense(Index n) const {
  if (is_identity()) return Matrix::Identity(n, n);
  return is_sparse() ? Matrix(sparse()) : dense();
}

Tensor3 mode_apply(const Tensor3& t, const ModeOp& b1, const ModeOp& b2, const ModeOp& b3) {
  Dims d = t.dims();
  if (b1.rows(d.n1) != d.n1 || b2.rows(d.n2) != d.n2 || b3.rows(d.n3) != d.n3)
    throw ShapeError("mode_apply operator rows must equal tensor dimensions");
  Dims out{b1.cols(d.n1), b2.cols(d.n2), b3.cols(d.n3)};

  if (t.is_sparse()) {
    double f1 = op_fanout(b1, d.n1), f2 = op_fanout(b2, d.n2), f3 = op_fanout(b3, d.n3);
    double scatter = static_cast<double>(t.nnz()) * f1 * f2 * f3;
    double dense_cost = static_cast<double>(d.size()) * static_cast<double>(std::max({out.n1, out.n2, out.n3, Index{1}}));
    if (scatter <= dense_cost || d.size() > (Index{1} << 26)) {
      bool dense_out = out.size() <= (Index{1} << 22);
      Tensor3 acc = dense_out ? Tensor3::zeros(out) : Tensor3();
      std::vector<Entry> entries;
      t.for_each_nonzero([&](Index a, Index b, Index c, double v) {
        for_op_row(b1, a, [&](Index i, double w1) {
          for_op_row(b2, b, [&](Index j, double w2) {
            double v12 = v * w1 * w2;
            for_op_row(b3, c, [&](Index l, double w3) {
              if (dense_out)
                acc.at(i, j, l) += v12 * w3;
              else
                entries.push_back({i, j, l, v12 * w3});
            });
          });
        });
      });
      return dense_out ? acc : Tensor3::from_entries(out, std::move(entries));
    }
    return mode_apply(t.to_dense(), b1, b2, b3);
  }

  std::vector<double> x = t.values();
  Index n1 = d.n1, n2 = d.n2, n3 = d.n3;
  if (!b1.is_identity()) {
    x = apply_mode1(x, n1, n2 * n3, b1);
    n1 = out.n1;
  }
  if (!b3.is_identity()) {
    x = apply_mode3(x, n1 * n2, n3, b3);
    n3 = out.n3;
  }
  if (!b2.is_identity()) {
    x = apply_mode2(x, n1, n2, n3, b2);
    n2 = out.n2;
  }
  return Tensor3::from_dense(out, std::move(x));
}

// ---------------------------------------------------------------- Khatri-Rao

Index ImplicitKR::rows() const { return factors.empty() ? 0 : factors.front().rows(); }

Index ImplicitKR::cols() const {
  if (factors.empty()) return 0;
  Index c = 1;
  for (const Matrix& f : factors) c *= f.cols();
  return c;
}

Vector ImplicitKR::row(Index i) const {
  if (factors.empty()) throw ShapeError("Khatri-Rao product with no factors");
  for (const Matrix& f : factors)
    if (f.rows() != rows()) throw ShapeError("Khatri-Rao factors must share their row count");
  if (i < 0 || i >= rows()) throw ShapeError("Khatri-Rao row index out of range");
  Vector v = factors.front().row(i).transpose();
  for (std::size_t t = 1; t < factors.size(); ++t) {
    const Matrix& f = factors[t];
    Vector next(v.size() * f.cols());
    for (Index a = 0; a < v.size(); ++a) next.segment(a * f.cols(), f.cols()) = v(a) * f.row(i).transpose();
    v = std::move(next);
  }
  return v;
}

Matrix ImplicitKR::materialize() const {
  Matrix m(rows(), cols());
  for (Index i = 0; i < rows(); ++i) m.row(i) = row(i).transpose();
  return m;
}

Vector kr_row(const ImplicitKR& k, Index i) { return k.row(i); }

// ---------------------------------------------------------------- factors

FactorTriple FactorTriple::zeros(Dims d, Index r) {
  return {Matrix::Zero(d.n1, r), Matrix::Zero(d.n2, r), Matrix::Zero(d.n3, r)};
}

void FactorTriple::check() const {
  if (V.cols() != U.cols() || W.cols() != U.cols()) throw ShapeError("factor matrices must share their column count");
}

namespace {

// Slice i of the factored tensor as an n2 x n3 matrix.
Matrix factor_slice(const FactorTriple& f, Index i) {
  return (f.V.array().rowwise() * f.U.row(i).array()).matrix() * f.W.transpose();
}

Matrix tucker_slice(const TuckerForm& f, const Tensor3& core, bool r_identity, Index i) {
  Dims s = f.core.dims();
  Matrix g = Matrix::Zero(s.n2, s.n3);
  for (Index a = 0; a < s.n1; ++a) {
    double w = f.P(i, a);
    if (w == 0.0) continue;
    Eigen::Map<const RowMajorMatrix> ca(core.values().data() + a * s.n2 * s.n3, s.n2, s.n3);
    g += w * ca;
  }
  if (r_identity) return f.Q * g;
  return f.Q * g * f.R.transpose();
}

template <class SliceFn>
CostReport slice_residual(const Tensor3& t, SliceFn&& slice_of) {
  Dims d = t.dims();
  CostReport r;
  std::size_t cursor = 0;
  const auto& entries = t.entries();
  for (Index i = 0; i < d.n1; ++i) {
    Matrix s = slice_of(i);
    if (t.is_sparse()) {
      while (cursor < entries.size() && entries[cursor].i == i) {
        s(entries[cursor].j, entries[cursor].l) -= entries[cursor].value;
        ++cursor;
      }
    } else {
      Eigen::Map<const RowMajorMatrix> ts(t.values().data() + i * d.n2 * d.n3, d.n2, d.n3);
      s -= ts;
    }
    r.fro2 += s.squaredNorm();
    r.l1 += s.cwiseAbs().sum();
  }
  return r;
}

}  // namespace

Tensor3 eval_factors(const FactorTriple& f) {
  f.check();
  Dims d = f.dims();
  Tensor3 t = Tensor3::zeros(d);
  for (Index i = 0; i < d.n1; ++i) {
    Matrix s = factor_slice(f, i);
    Eigen::Map<RowMajorMatrix>(t.values().data() + i * d.n2 * d.n3, d.n2, d.n3) = s;
  }
  return t;
}

double CostReport::fro() const { return std::sqrt(std::max(fro2, 0.0)); }

CostReport residual_cost(const Tensor3& t, const FactorTriple& f) {
  f.check();
  if (f.dims() != t.dims()) throw ShapeError("factor dimensions do not match the tensor");
  if (f.rank() == 0) return {t.fro_norm2(), t.l1_norm()};
  return slice_residual(t, [&](Index i) { return factor_slice(f, i); });
}

double residual_fro2_gram(const Tensor3& t, const FactorTriple& f) {
  f.check();
  if (f.dims() != t.dims()) throw ShapeError("factor dimensions do not match the tensor");
  Matrix g = (f.U.transpose() * f.U).cwiseProduct(f.V.transpose() * f.V).cwiseProduct(f.W.transpose() * f.W);
  double inner = 0.0;
  t.for_each_nonzero([&](Index i, Index j, Index l, double v) {
    inner += v * (f.U.row(i).array() * f.V.row(j).array() * f.W.row(l).array()).sum();
  });
  return std::max(0.0, t.fro_norm2() - 2.0 * inner + g.sum());
}

FactorTriple TuckerForm::expand() const {
  Dims s = core.dims();
  Index r = s.size();
  Dims d = dims();
  FactorTriple f = FactorTriple::zeros(d, r);
  Index col = 0;
  for (Index a = 0; a < s.n1; ++a)
    for (Index b = 0; b < s.n2; ++b)
      for (Index c = 0; c < s.n3; ++c, ++col) {
        f.U.col(col) = core(a, b, c) * P.col(a);
        f.V.col(col) = Q.col(b);
        f.W.col(col) = R.col(c);
      }
  return f;
}

FactorTriple TuckerForm::compress() const {
  Dims s = core.dims();
  Dims d = dims();
  FactorTriple f = FactorTriple::zeros(d, s.n1 * s.n2);
  for (Index a = 0; a < s.n1; ++a)
    for (Index b = 0; b < s.n2; ++b) {
      Index col = a * s.n2 + b;
      Vector fiber(s.n3);
      for (Index c = 0; c < s.n3; ++c) fiber(c) = core(a, b, c);
      f.U.col(col) = P.col(a);
      f.V.col(col) = Q.col(b);
      f.W.col(col) = R * fiber;
    }
  return f;
}

CostReport residual_cost(const Tensor3& t, const TuckerForm& f) {
  if (f.dims() != t.dims()) throw ShapeError("Tucker factor dimensions do not match the tensor");
  Dims s = f.core.dims();
  if (f.P.cols() != s.n1 || f.Q.cols() != s.n2 || f.R.cols() != s.n3)
    throw ShapeError("Tucker core does not match its factor matrices");
  const Tensor3 core = f.core.is_sparse() ? f.core.to_dense() : f.core;
  const bool r_identity = f.R.rows() == f.R.cols() && f.R.isIdentity(0.0);
  return slice_residual(t, [&](Index i) { return tucker_slice(f, core, r_identity, i); });
}

}  // namespace tlra
