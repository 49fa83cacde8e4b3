#include "tlra/sketch.hpp"

#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>

namespace tlra {

namespace {

enum SeedTag : std::uint64_t { kHashTag = 1, kSignTag = 2, kValueTag = 3, kFactorHashTag = 100, kFactorSignTag = 200 };

bool kind_is_hashing(SketchKind k) {
  return k == SketchKind::countsketch || k == SketchKind::cauchy_sparse || k == SketchKind::tensorsketch;
}

}  // namespace

std::string to_string(SketchKind k) {
  switch (k) {
    case SketchKind::countsketch: return "countsketch";
    case SketchKind::gaussian: return "gaussian";
    case SketchKind::composed: return "composed";
    case SketchKind::tensorsketch: return "tensorsketch";
    case SketchKind::cauchy_dense: return "cauchy_dense";
    case SketchKind::cauchy_sparse: return "cauchy_sparse";
    case SketchKind::identity: return "identity";
  }
  return "unknown";
}

SketchKind sketch_kind_from_string(const std::string& s) {
  for (auto k : {SketchKind::countsketch, SketchKind::gaussian, SketchKind::composed, SketchKind::tensorsketch,
                 SketchKind::cauchy_dense, SketchKind::cauchy_sparse, SketchKind::identity})
    if (to_string(k) == s) return k;
  throw InvalidParams("unknown sketch kind '" + s + "'");
}

Index amp_sketch_dim(int q, double eps, double delta) {
  if (!(eps > 0.0) || !(delta > 0.0)) throw InvalidParams("eps and delta must be positive");
  return static_cast<Index>(std::ceil((2.0 + std::pow(3.0, q)) / (eps * eps * delta)));
}

// ---------------------------------------------------------------- TensorSketchOp

TensorSketchOp::TensorSketchOp(std::vector<Index> factor_dims, Index m, std::uint64_t seed, int hash_independence,
                               int sign_independence)
    : dims_(std::move(factor_dims)), m_(m) {
  if (m_ < 1) throw InvalidParams("sketch output dimension must be >= 1");
  if (dims_.empty()) throw InvalidParams("tensorsketch needs at least one factor");
  for (std::size_t t = 0; t < dims_.size(); ++t) {
    if (dims_[t] < 1) throw InvalidParams("tensorsketch factor dimensions must be >= 1");
    PolyHash h(derive_seed(seed, kFactorHashTag + t), hash_independence);
    PolyHash s(derive_seed(seed, kFactorSignTag + t), sign_independence);
    std::vector<Index> ht(static_cast<std::size_t>(dims_[t]));
    std::vector<double> st(static_cast<std::size_t>(dims_[t]));
    for (Index i = 0; i < dims_[t]; ++i) {
      ht[static_cast<std::size_t>(i)] = static_cast<Index>(h.bucket(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(m_)));
      st[static_cast<std::size_t>(i)] = s.sign(static_cast<std::uint64_t>(i));
    }
    h_.push_back(std::move(ht));
    s_.push_back(std::move(st));
  }
}

Index TensorSketchOp::input_dim() const {
  Index n = 1;
  for (Index d : dims_) n *= d;
  return n;
}

Index TensorSketchOp::bucket(Index c) const {
  Index sum = 0;
  for (std::size_t t = dims_.size(); t-- > 0;) {
    sum += h_[t][static_cast<std::size_t>(c % dims_[t])];
    c /= dims_[t];
  }
  return sum % m_;
}

double TensorSketchOp::sign(Index c) const {
  double s = 1.0;
  for (std::size_t t = dims_.size(); t-- > 0;) {
    s *= s_[t][static_cast<std::size_t>(c % dims_[t])];
    c /= dims_[t];
  }
  return s;
}

Matrix TensorSketchOp::apply_kr(const ImplicitKR& k) const {
  if (k.factors.size() != dims_.size()) throw ShapeError("tensorsketch factor count mismatch");
  for (std::size_t t = 0; t < dims_.size(); ++t)
    if (k.factors[t].cols() != dims_[t] || k.factors[t].rows() != k.rows())
      throw ShapeError("tensorsketch factor dimensions mismatch");
  using C = std::complex<double>;
  Eigen::FFT<double> fft;
  auto n = static_cast<std::size_t>(m_);
  Matrix out = Matrix::Zero(k.rows(), m_);
  std::vector<C> acc(n), spec(n), buf(n), time(n);
  for (Index r = 0; r < k.rows(); ++r) {
    std::fill(acc.begin(), acc.end(), C(1.0, 0.0));
    for (std::size_t t = 0; t < dims_.size(); ++t) {
      std::fill(buf.begin(), buf.end(), C(0.0, 0.0));
      const Matrix& f = k.factors[t];
      for (Index i = 0; i < dims_[t]; ++i) {
        double v = f(r, i);
        if (v != 0.0) buf[static_cast<std::size_t>(h_[t][static_cast<std::size_t>(i)])] += s_[t][static_cast<std::size_t>(i)] * v;
      }
      fft.fwd(spec, buf);
      for (std::size_t p = 0; p < n; ++p) acc[p] *= spec[p];
    }
    fft.inv(time, acc);
    for (std::size_t p = 0; p < n; ++p) out(r, static_cast<Index>(p)) = time[p].real();
  }
  return out;
}

Matrix TensorSketchOp::apply_rows(const Matrix& m) const {
  if (m.cols() != input_dim()) throw ShapeError("tensorsketch input dimension mismatch");
  Matrix out = Matrix::Zero(m.rows(), m_);
  for (Index c = 0; c < m.cols(); ++c) {
    if (m.col(c).isZero(0.0)) continue;
    out.col(bucket(c)) += sign(c) * m.col(c);
  }
  return out;
}

Matrix TensorSketchOp::apply_rows(const SparseMatrix& m) const {
  if (m.cols() != input_dim()) throw ShapeError("tensorsketch input dimension mismatch");
  Matrix out = Matrix::Zero(m.rows(), m_);
  for (Index r = 0; r < m.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) out(r, bucket(it.col())) += sign(it.col()) * it.value();
  return out;
}

Matrix tensorsketch_apply_kr(const ImplicitKR& k, const TensorSketchOp& ts) { return ts.apply_kr(k); }
Matrix tensorsketch_apply_rows(const Matrix& m, const TensorSketchOp& ts) { return ts.apply_rows(m); }

// ---------------------------------------------------------------- SketchOp

SketchOp::SketchOp(SketchSpec spec, bool realize) : spec_(std::move(spec)), realized_(realize) {
  const SketchKind kind = spec_.kind;
  if (spec_.output_dim < 1) throw InvalidParams("sketch output dimension must be >= 1");
  if (spec_.input_dim < 0) throw InvalidParams("sketch input dimension must be >= 0");
  if (kind == SketchKind::identity && spec_.output_dim != spec_.input_dim)
    throw InvalidParams("identity sketch needs output_dim == input_dim");

  bool gaussian_like = kind == SketchKind::gaussian || kind == SketchKind::composed;
  scale_ = std::isnan(spec_.scale) ? (gaussian_like ? 1.0 / std::sqrt(static_cast<double>(spec_.output_dim)) : 1.0)
                                   : spec_.scale;
  value_seed_ = derive_seed(spec_.seed, kValueTag);

  if (kind == SketchKind::composed) {
    mid_ = spec_.intermediate_dim > 0 ? spec_.intermediate_dim
                                      : std::min<Index>(spec_.input_dim, 4 * spec_.output_dim * spec_.output_dim);
    mid_ = std::max<Index>(mid_, 1);
  }
  if (kind == SketchKind::tensorsketch) {
    ts_ = TensorSketchOp(spec_.factor_dims, spec_.output_dim, spec_.seed, spec_.hash_independence,
                         spec_.sign_independence);
    if (ts_.input_dim() != spec_.input_dim) throw InvalidParams("tensorsketch input_dim must equal the product of factor dims");
  }
  bool own_hash = kind == SketchKind::countsketch || kind == SketchKind::cauchy_sparse || kind == SketchKind::composed;
  if (own_hash) {
    hash_ = PolyHash(derive_seed(spec_.seed, kHashTag), spec_.hash_independence);
    if (kind != SketchKind::cauchy_sparse) sign_ = PolyHash(derive_seed(spec_.seed, kSignTag), spec_.sign_independence);
    if (!spec_.forced_buckets.empty()) {
      if (static_cast<Index>(spec_.forced_buckets.size()) != spec_.input_dim)
        throw InvalidParams("forced bucket table has the wrong length");
      for (Index b : spec_.forced_buckets)
        if (b < 0 || b >= hash_width()) throw InvalidParams("forced bucket out of range");
    }
    if (!spec_.forced_signs.empty() && static_cast<Index>(spec_.forced_signs.size()) != spec_.input_dim)
      throw InvalidParams("forced sign table has the wrong length");
  }
  if (!realized_) return;
  if (own_hash) {
    auto n = static_cast<std::size_t>(spec_.input_dim);
    buckets_.resize(n);
    weights_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      buckets_[i] = raw_bucket(static_cast<Index>(i));
      weights_[i] = raw_weight(static_cast<Index>(i));
    }
  }
  if (kind == SketchKind::gaussian || kind == SketchKind::cauchy_dense || kind == SketchKind::composed) {
    Index cols = kind == SketchKind::composed ? mid_ : spec_.input_dim;
    dense_.resize(spec_.output_dim, cols);
    for (Index o = 0; o < spec_.output_dim; ++o)
      for (Index i = 0; i < cols; ++i) dense_(o, i) = raw_dense(o, i);
  }
}

Index SketchOp::raw_bucket(Index in) const {
  if (!spec_.forced_buckets.empty()) return spec_.forced_buckets[static_cast<std::size_t>(in)];
  return static_cast<Index>(hash_.bucket(static_cast<std::uint64_t>(in), static_cast<std::uint64_t>(hash_width())));
}

double SketchOp::raw_weight(Index in) const {
  auto u = static_cast<std::uint64_t>(in);
  if (spec_.kind == SketchKind::cauchy_sparse) return scale_ * counter_cauchy(value_seed_, u);
  double s = spec_.forced_signs.empty() ? sign_.sign(u) : spec_.forced_signs[static_cast<std::size_t>(in)];
  // The composed sketch carries its scale on the Gaussian stage.
  return spec_.kind == SketchKind::composed ? s : s * scale_;
}

double SketchOp::raw_dense(Index out, Index col) const {
  Index cols = spec_.kind == SketchKind::composed ? mid_ : spec_.input_dim;
  auto ctr = static_cast<std::uint64_t>(out) * static_cast<std::uint64_t>(cols) + static_cast<std::uint64_t>(col);
  return scale_ * (spec_.kind == SketchKind::cauchy_dense ? counter_cauchy(value_seed_, ctr)
                                                          : counter_normal(value_seed_, ctr));
}

void SketchOp::require_realized() const {
  if (!realized_) throw InvalidParams("sketch was constructed without realized tables");
}

bool SketchOp::is_hashing() const { return kind_is_hashing(spec_.kind) || spec_.kind == SketchKind::composed; }

Index SketchOp::bucket(Index in) const {
  if (spec_.kind == SketchKind::tensorsketch) return ts_.bucket(in);
  if (spec_.kind == SketchKind::identity) return in;
  return realized_ ? buckets_[static_cast<std::size_t>(in)] : raw_bucket(in);
}

double SketchOp::weight(Index in) const {
  if (spec_.kind == SketchKind::tensorsketch) return ts_.sign(in) * scale_;
  if (spec_.kind == SketchKind::identity) return 1.0;
  return realized_ ? weights_[static_cast<std::size_t>(in)] : raw_weight(in);
}

double SketchOp::entry(Index out, Index in) const {
  if (out < 0 || out >= spec_.output_dim || in < 0 || in >= spec_.input_dim) throw ShapeError("sketch entry out of range");
  switch (spec_.kind) {
    case SketchKind::identity: return out == in ? 1.0 : 0.0;
    case SketchKind::countsketch:
    case SketchKind::cauchy_sparse:
    case SketchKind::tensorsketch: return bucket(in) == out ? weight(in) : 0.0;
    case SketchKind::composed: return weight(in) * (realized_ ? dense_(out, bucket(in)) : raw_dense(out, bucket(in)));
    case SketchKind::gaussian:
    case SketchKind::cauchy_dense: return realized_ ? dense_(out, in) : raw_dense(out, in);
  }
  return 0.0;
}

Matrix SketchOp::hash_left(const Matrix& m) const {
  Matrix out = Matrix::Zero(hash_width(), m.cols());
  for (Index r = 0; r < m.rows(); ++r) out.row(bucket(r)) += weight(r) * m.row(r);
  return out;
}

Matrix SketchOp::hash_left(const SparseMatrix& m) const {
  Matrix out = Matrix::Zero(hash_width(), m.cols());
  for (Index r = 0; r < m.outerSize(); ++r) {
    Index b = bucket(r);
    double w = weight(r);
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) out(b, it.col()) += w * it.value();
  }
  return out;
}

Matrix SketchOp::hash_right(const Matrix& m) const {
  Matrix out = Matrix::Zero(m.rows(), hash_width());
  for (Index c = 0; c < m.cols(); ++c) out.col(bucket(c)) += weight(c) * m.col(c);
  return out;
}

Matrix SketchOp::hash_right(const SparseMatrix& m) const {
  Matrix out = Matrix::Zero(m.rows(), hash_width());
  for (Index r = 0; r < m.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) out(r, bucket(it.col())) += weight(it.col()) * it.value();
  return out;
}

Matrix SketchOp::apply_left(const Matrix& m) const {
  require_realized();
  if (m.rows() != spec_.input_dim) throw ShapeError("sketch input dimension mismatch");
  switch (spec_.kind) {
    case SketchKind::identity: return m;
    case SketchKind::composed: return dense_ * hash_left(m);
    case SketchKind::gaussian:
    case SketchKind::cauchy_dense: return dense_ * m;
    default: return hash_left(m);
  }
}

Matrix SketchOp::apply_left(const SparseMatrix& m) const {
  require_realized();
  if (m.rows() != spec_.input_dim) throw ShapeError("sketch input dimension mismatch");
  switch (spec_.kind) {
    case SketchKind::identity: return Matrix(m);
    case SketchKind::composed: return dense_ * hash_left(m);
    case SketchKind::gaussian:
    case SketchKind::cauchy_dense: return dense_ * m;
    default: return hash_left(m);
  }
}

Matrix SketchOp::apply_right(const Matrix& m) const {
  require_realized();
  if (m.cols() != spec_.input_dim) throw ShapeError("sketch input dimension mismatch");
  switch (spec_.kind) {
    case SketchKind::identity: return m;
    case SketchKind::composed: return hash_right(m) * dense_.transpose();
    case SketchKind::gaussian:
    case SketchKind::cauchy_dense: return m * dense_.transpose();
    default: return hash_right(m);
  }
}

Matrix SketchOp::apply_right(const SparseMatrix& m) const {
  require_realized();
  if (m.cols() != spec_.input_dim) throw ShapeError("sketch input dimension mismatch");
  switch (spec_.kind) {
    case SketchKind::identity: return Matrix(m);
    case SketchKind::composed: return hash_right(m) * dense_.transpose();
    case SketchKind::gaussian:
    case SketchKind::cauchy_dense: return m * dense_.transpose();
    default: return hash_right(m);
  }
}

ModeOp SketchOp::mode_op() const {
  require_realized();
  switch (spec_.kind) {
    case SketchKind::identity: return ModeOp();
    case SketchKind::countsketch:
    case SketchKind::cauchy_sparse:
    case SketchKind::tensorsketch: {
      SparseMatrix t(spec_.input_dim, spec_.output_dim);
      t.reserve(Eigen::VectorXi::Constant(spec_.input_dim, 1));
      for (Index i = 0; i < spec_.input_dim; ++i) t.insert(i, bucket(i)) = weight(i);
      t.makeCompressed();
      return ModeOp(std::move(t));
    }
    default: return ModeOp(Matrix(dense().transpose()));
  }
}

Matrix SketchOp::dense() const {
  Matrix pi(spec_.output_dim, spec_.input_dim);
  for (Index i = 0; i < spec_.input_dim; ++i) {
    Vector e = Vector::Zero(spec_.input_dim);
    e(i) = 1.0;
    pi.col(i) = apply_left(Matrix(e));
  }
  return pi;
}

Matrix sketch_apply_right(const Matrix& m, const SketchSpec& s) { return SketchOp(s).apply_right(m); }
Matrix sketch_apply_left(const SketchSpec& s, const Matrix& m) { return SketchOp(s).apply_left(m); }

}  // namespace tlra
