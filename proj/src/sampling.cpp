#include "tlra/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tlra/linalg.hpp"
#include "tlra/sketch.hpp"

namespace tlra {

// ---------------------------------------------------------------- SamplingOperator

Matrix SamplingOperator::select_rows(const Matrix& m) const {
  Matrix out(count(), m.cols());
  for (Index r = 0; r < count(); ++r) out.row(r) = weights[static_cast<std::size_t>(r)] * m.row(indices[static_cast<std::size_t>(r)]);
  return out;
}

Matrix SamplingOperator::select_cols(const Matrix& m) const {
  Matrix out(m.rows(), count());
  for (Index r = 0; r < count(); ++r) out.col(r) = weights[static_cast<std::size_t>(r)] * m.col(indices[static_cast<std::size_t>(r)]);
  return out;
}

Matrix SamplingOperator::raw_rows(const Matrix& m) const {
  Matrix out(count(), m.cols());
  for (Index r = 0; r < count(); ++r) out.row(r) = m.row(indices[static_cast<std::size_t>(r)]);
  return out;
}

Matrix SamplingOperator::raw_cols(const Matrix& m) const {
  Matrix out(m.rows(), count());
  for (Index r = 0; r < count(); ++r) out.col(r) = m.col(indices[static_cast<std::size_t>(r)]);
  return out;
}

SparseMatrix SamplingOperator::matrix() const {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) trips.emplace_back(indices[r], static_cast<Index>(r), weights[r]);
  SparseMatrix m(source_dim, count());
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

SamplingOperator SamplingOperator::identity(Index n) {
  SamplingOperator op;
  op.source_dim = n;
  for (Index i = 0; i < n; ++i) {
    op.indices.push_back(i);
    op.weights.push_back(1.0);
  }
  return op;
}

// ---------------------------------------------------------------- scores

Vector leverage_scores(const Matrix& m) {
  if (m.rows() == 0) throw ShapeError("leverage scores of an empty matrix");
  return orthonormal_basis(m).rowwise().squaredNorm();
}

SamplingOperator sample_operator(const Vector& probs, Index count, std::uint64_t seed, double p) {
  if (count < 1) throw InvalidParams("sample count must be >= 1");
  if (!(p > 0.0)) throw InvalidParams("sampling exponent p must be positive");
  std::vector<double> w(probs.data(), probs.data() + probs.size());
  DiscreteSampler sampler(w);
  Rng rng(seed);
  SamplingOperator op;
  op.source_dim = probs.size();
  op.indices.reserve(static_cast<std::size_t>(count));
  op.weights.reserve(static_cast<std::size_t>(count));
  for (Index r = 0; r < count; ++r) {
    std::size_t i = sampler.draw(rng.uniform());
    double q = w[i] / sampler.total();
    op.indices.push_back(static_cast<Index>(i));
    op.weights.push_back(std::pow(static_cast<double>(count) * q, -1.0 / p));
  }
  return op;
}

LewisResult lewis_weights(const Matrix& m, double p, int iters) {
  if (!(p >= 1.0 && p <= 2.0)) throw InvalidParams("Lewis weights need p in [1, 2]");
  if (m.rows() < m.cols()) throw ShapeError("Lewis weights need rows >= cols");
  const Index n = m.rows();
  std::vector<Index> live;
  for (Index i = 0; i < n; ++i)
    if (m.row(i).squaredNorm() > 0.0) live.push_back(i);
  LewisResult res;
  res.weights = Vector::Zero(n);
  if (live.empty()) return res;

  Matrix ml(static_cast<Index>(live.size()), m.cols());
  for (std::size_t r = 0; r < live.size(); ++r) ml.row(static_cast<Index>(r)) = m.row(live[r]);
  Vector w = Vector::Ones(ml.rows());
  const double e = 0.5 - 1.0 / p;

  // tau_i(W^e M): leverage of the row-rescaled matrix.
  auto taus = [&](const Vector& wt) {
    Matrix scaled = wt.array().pow(e).matrix().asDiagonal() * ml;
    return leverage_scores(scaled);
  };
  for (int it = 0; it < iters; ++it) {
    Vector tau = taus(w);
    // m_i^T (M^T W^(2e) M)^+ m_i = tau_i / w_i^(2e)
    Vector next = (tau.array() / w.array().pow(2.0 * e)).pow(p / 2.0).matrix();
    for (Index i = 0; i < next.size(); ++i)
      if (!(next(i) > 0.0)) next(i) = std::numeric_limits<double>::min();
    w = next;
    res.iterations = it + 1;
  }
  res.residual = (w - taus(w)).cwiseAbs().maxCoeff();
  for (std::size_t r = 0; r < live.size(); ++r) res.weights(live[r]) = w(static_cast<Index>(r));
  return res;
}

// ---------------------------------------------------------------- Khatri-Rao sampler

namespace {

Matrix hadamard_gram(const std::vector<Matrix>& grams, std::size_t from, Index k) {
  Matrix g = Matrix::Ones(k, k);
  for (std::size_t t = from; t < grams.size(); ++t) g = g.cwiseProduct(grams[t]);
  return g;
}

enum : std::uint64_t { kWhitenSketchTag = 0x1000, kStageSketchTag = 0x2000 };

}  // namespace

KrLeverageSampler::KrLeverageSampler(std::vector<Matrix> factors, std::uint64_t seed, KrSamplerOptions opts)
    : factors_(std::move(factors)) {
  if (factors_.empty()) throw ShapeError("Khatri-Rao sampler needs at least one factor");
  const Index k = factors_.front().rows();
  for (const Matrix& f : factors_) {
    if (f.rows() != k) throw ShapeError("Khatri-Rao factors must share their row count");
    if (f.cols() < 1) throw ShapeError("Khatri-Rao factors must have at least one column");
    domain_ *= f.cols();
    grams_.push_back(f * f.transpose());
  }
  const std::size_t q = factors_.size();
  if (!(opts.eps0 > 0.0)) throw InvalidParams("eps0 must be positive");
  Index m = opts.sketch_dim;
  if (m <= 0) {
    double by_log = 64.0 * std::log(static_cast<double>(std::max<Index>(domain_, 2)));
    double by_eps = static_cast<double>(k * k) * (2.0 + std::pow(3.0, static_cast<double>(q))) / opts.eps0;
    m = static_cast<Index>(std::ceil(std::min(std::max(by_log, by_eps), 65536.0)));
  }
  m = std::max(m, k);

  // Gram estimate of the suffix product U_{l+1} ⊙ ... ⊙ U_q. A sketch at least as
  // wide as its domain cannot beat the exact Hadamard product of Grams.
  auto suffix_gram = [&](std::size_t l, std::uint64_t tag, bool& sketched) -> Matrix {
    Index dom = 1;
    std::vector<Index> dims;
    ImplicitKR kr;
    for (std::size_t t = l; t < q; ++t) {
      dom *= factors_[t].cols();
      dims.push_back(factors_[t].cols());
      kr.factors.push_back(factors_[t]);
    }
    sketched = l < q && m < dom;
    if (!sketched) return hadamard_gram(grams_, l, k);
    TensorSketchOp ts(dims, m, derive_seed(seed, tag));
    Matrix p = ts.apply_kr(kr);
    return p * p.transpose();
  };

  // Independent sketches for the whitening matrix and for the first-stage masses.
  bool sk = false;
  Matrix g_whiten = suffix_gram(0, kWhitenSketchTag, sk);
  Matrix g0 = sk ? suffix_gram(0, kStageSketchTag, sk) : g_whiten;
  sketched_.push_back(sk);
  suffix_.resize(q + 1);
  for (std::size_t l = 1; l <= q; ++l) {
    suffix_[l] = suffix_gram(l, kStageSketchTag + l, sk);
    if (l < q) sketched_.push_back(sk);
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(g_whiten);
  Vector lam = eig.eigenvalues().cwiseMax(0.0);
  double lmax = lam.size() ? lam.maxCoeff() : 0.0;
  if (!(lmax > 0.0)) throw DegenerateInputError("Khatri-Rao product is zero");
  // Gram entries carry rounding of order k * eps * lmax; eigenvalues below a
  // margin above that are numerically zero.
  double cut = 100.0 * static_cast<double>(k) * std::numeric_limits<double>::epsilon() * lmax;
  std::vector<Index> keep;
  for (Index i = 0; i < lam.size(); ++i)
    if (lam(i) > cut) keep.push_back(i);
  whiten_.resize(static_cast<Index>(keep.size()), k);
  for (std::size_t r = 0; r < keep.size(); ++r)
    whiten_.row(static_cast<Index>(r)) = eig.eigenvectors().col(keep[r]).transpose() / std::sqrt(lam(keep[r]));
  alpha_ = (whiten_ * g0).cwiseProduct(whiten_).rowwise().sum().cwiseMax(0.0);
  if (!(alpha_.sum() > 0.0)) throw DegenerateInputError("Khatri-Rao leverage masses are all zero");
}

Vector KrLeverageSampler::stage_masses(std::size_t l, const Vector& prefix) const {
  // Rows of V_l are prefix ∘ (U_l)_j; mass_j = row_j H row_j^T.
  Matrix x = factors_[l - 1].transpose() * prefix.asDiagonal();
  return (x * suffix_[l]).cwiseProduct(x).rowwise().sum().cwiseMax(0.0);
}

Index KrLeverageSampler::draw(Rng& rng) const {
  std::vector<double> a(alpha_.data(), alpha_.data() + alpha_.size());
  std::size_t j0 = DiscreteSampler(a).draw(rng.uniform());
  Vector prefix = whiten_.row(static_cast<Index>(j0)).transpose();
  Index col = 0;
  for (std::size_t l = 1; l <= factors_.size(); ++l) {
    Vector b = stage_masses(l, prefix);
    std::vector<double> bv(b.data(), b.data() + b.size());
    Index j = static_cast<Index>(DiscreteSampler(bv).draw(rng.uniform()));
    col = col * factors_[l - 1].cols() + j;
    prefix = prefix.cwiseProduct(factors_[l - 1].col(j));
  }
  return col;
}

double KrLeverageSampler::probability(Index col) const {
  if (col < 0 || col >= domain_) throw ShapeError("Khatri-Rao column out of range");
  std::vector<Index> js(factors_.size());
  for (std::size_t t = factors_.size(); t-- > 0;) {
    js[t] = col % factors_[t].cols();
    col /= factors_[t].cols();
  }
  double total = 0.0, asum = alpha_.sum();
  for (Index i = 0; i < whiten_.rows(); ++i) {
    if (alpha_(i) <= 0.0) continue;
    double p = alpha_(i) / asum;
    Vector prefix = whiten_.row(i).transpose();
    for (std::size_t l = 1; l <= factors_.size() && p > 0.0; ++l) {
      Vector b = stage_masses(l, prefix);
      double s = b.sum();
      p = s > 0.0 ? p * b(js[l - 1]) / s : 0.0;
      prefix = prefix.cwiseProduct(factors_[l - 1].col(js[l - 1]));
    }
    total += p;
  }
  return total;
}

SamplingOperator KrLeverageSampler::sample(Index count, Rng& rng) const {
  if (count < 1) throw InvalidParams("sample count must be >= 1");
  SamplingOperator op;
  op.source_dim = domain_;
  for (Index r = 0; r < count; ++r) {
    Index c = draw(rng);
    op.indices.push_back(c);
    op.weights.push_back(1.0 / std::sqrt(probability(c) * static_cast<double>(count)));
  }
  return op;
}

SamplingOperator kr_leverage_sample(const std::vector<Matrix>& factors, Index count, std::uint64_t seed, double eps0) {
  KrSamplerOptions opts;
  opts.eps0 = eps0;
  KrLeverageSampler s(factors, seed, opts);
  Rng rng(derive_seed(seed, 0x5a));
  return s.sample(count, rng);
}

}  // namespace tlra
