#include "tlra/l1_lra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tlra/linalg.hpp"

namespace tlra {

namespace {

// argmin_x sum_j |b_j x - c_j|: the median of c_j / b_j weighted by |b_j|.
double weighted_median(const Vector& b, const Vector& c) {
  std::vector<std::pair<double, double>> pts;
  double total = 0.0;
  for (Index j = 0; j < b.size(); ++j)
    if (b(j) != 0.0) {
      pts.emplace_back(c(j) / b(j), std::abs(b(j)));
      total += std::abs(b(j));
    }
  if (pts.empty()) return 0.0;
  std::sort(pts.begin(), pts.end());
  double acc = 0.0;
  for (const auto& [x, w] : pts) {
    acc += w;
    if (acc >= 0.5 * total) return x;
  }
  return pts.back().first;
}

double smoothed_l1(const Vector& r, double delta) { return (r.array().square() + delta * delta).sqrt().sum(); }

}  // namespace

L1RowResult l1_regression_row(const Matrix& bt, const Vector& c, int iters) {
  if (bt.rows() != c.size()) throw ShapeError("l1_regression_row: design and target lengths differ");
  if (iters < 1) throw InvalidParams("IRLS needs at least one iteration");
  L1RowResult out;
  const Index k = bt.cols();
  if (k == 0) {
    out.x = Vector::Zero(0);
    out.objective = c.cwiseAbs().sum();
    return out;
  }
  if (k == 1) {
    out.x = Vector::Constant(1, weighted_median(bt.col(0), c));
    out.objective = (bt * out.x - c).cwiseAbs().sum();
    return out;
  }
  const double scale = c.size() ? std::max(c.cwiseAbs().mean(), 1e-300) : 1.0;
  Vector x = lstsq(bt, c);
  Vector r = bt * x - c;
  out.x = x;
  out.objective = r.cwiseAbs().sum();
  for (int it = 0; it < iters; ++it) {
    // Shrinking delta keeps the smoothed objective nonincreasing: the reweighted
    // solve is a majorize-minimize step for the current delta, and a smaller
    // delta only lowers the smoothed value.
    double delta = scale * std::max(1e-8, std::pow(10.0, -(it + 1) / 4.0));
    Vector w = (r.array().square() + delta * delta).sqrt().inverse().matrix();
    Matrix g = bt.transpose() * w.asDiagonal() * bt;
    Vector rhs = bt.transpose() * w.cwiseProduct(c);
    Eigen::LDLT<Matrix> ldlt(g);
    Vector next = ldlt.info() == Eigen::Success ? Vector(ldlt.solve(rhs)) : Vector(pinv(g) * rhs);
    if (!next.allFinite()) break;
    x = next;
    r = bt * x - c;
    double sm = smoothed_l1(r, delta);
    double obj = r.cwiseAbs().sum();
    if (obj < out.objective) {
      out.objective = obj;
      out.x = x;
    }
    bool settled = !out.smoothed.empty() && delta <= scale * 1e-8 &&
                   out.smoothed.back() - sm <= 1e-13 * std::max(out.smoothed.back(), 1e-300);
    out.smoothed.push_back(sm);
    if (settled) break;
  }
  return out;
}

L1RegressionResult l1_regression(const Matrix& b, const Matrix& c, int iters) {
  if (b.cols() != c.cols()) throw ShapeError("l1_regression: B and C column counts differ");
  L1RegressionResult out;
  out.W = Matrix::Zero(c.rows(), b.rows());
  std::vector<double> obj(static_cast<std::size_t>(c.rows()), 0.0);
  const Matrix bt = b.transpose();
  parallel_for(static_cast<int>(c.rows()), [&](int i) {
    L1RowResult r = l1_regression_row(bt, c.row(i).transpose(), iters);
    out.W.row(i) = r.x.transpose();
    obj[static_cast<std::size_t>(i)] = r.objective;
  });
  out.objective = std::accumulate(obj.begin(), obj.end(), 0.0);
  return out;
}

double cauchy_norm_estimate(const Vector& sketched) {
  if (sketched.size() == 0) throw InvalidParams("empty sketch");
  std::vector<double> a(sketched.data(), sketched.data() + sketched.size());
  for (double& v : a) v = std::abs(v);
  auto mid = a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2);
  std::nth_element(a.begin(), mid, a.end());
  if (a.size() % 2) return *mid;
  double hi = *mid;
  return 0.5 * (hi + *std::max_element(a.begin(), mid));
}

Index lewis_budget(Index b) {
  double x = static_cast<double>(std::max<Index>(b, 1));
  return static_cast<Index>(std::ceil(4.0 * x * std::log(x + 1.0) - 1e-9));
}

SamplingOperator lewis_sample(const Matrix& v, Index count, std::uint64_t seed) {
  if (count >= v.rows() || v.rows() < v.cols()) return SamplingOperator::identity(v.rows());
  Vector w = lewis_weights(v, 1.0).weights;
  if (!(w.sum() > 0.0)) w = Vector::Ones(v.rows());
  return sample_operator(w, count, seed, 1.0);
}

ReducedProblem l1_reduce(const Tensor3& a, const std::array<Matrix, 3>& v, const std::array<SamplingOperator, 3>& t) {
  Dims d = a.dims();
  ReducedProblem rp;
  for (std::size_t m = 0; m < 3; ++m) {
    if (v[m].rows() != d[static_cast<int>(m) + 1] || t[m].source_dim != v[m].rows())
      throw ShapeError("l1_reduce: operator or basis does not match mode " + std::to_string(m + 1));
    rp.Y[m] = t[m].select_rows(v[m]);
  }
  rp.C = mode_apply(a, t[0].mode_op(), t[1].mode_op(), t[2].mode_op());
  return rp;
}

ReducedProblem l1_reduce(const Tensor3& a, const std::array<Matrix, 3>& v, std::array<Index, 3> t, std::uint64_t seed) {
  std::array<SamplingOperator, 3> ops;
  for (std::size_t m = 0; m < 3; ++m) {
    if (v[m].rows() != a.dims()[static_cast<int>(m) + 1]) throw ShapeError("l1_reduce: V has the wrong row count");
    Index cnt = t[m] > 0 ? t[m] : lewis_budget(v[m].cols());
    ops[m] = lewis_sample(v[m], cnt, derive_seed(seed, m + 1));
  }
  return l1_reduce(a, v, ops);
}

double l1_reduced_objective(const ReducedProblem& rp, const std::array<Matrix, 3>& x) {
  return residual_cost(rp.C, FactorTriple{rp.Y[0] * x[0], rp.Y[1] * x[1], rp.Y[2] * x[2]}).l1;
}

// ---------------------------------------------------------------- bicriteria

L1Params L1Params::resolved() const {
  L1Params p = *this;
  if (p.k < 1) throw InvalidParams("k must be >= 1");
  if (p.trials < 1) throw InvalidParams("trials must be >= 1");
  if (p.irls_iters < 1) throw InvalidParams("IRLS iterations must be >= 1");
  if (p.sketch != SketchKind::cauchy_dense && p.sketch != SketchKind::cauchy_sparse)
    throw InvalidParams("l1 sketches must be cauchy_dense or cauchy_sparse");
  const double k = static_cast<double>(p.k);
  if (p.s == 0) {
    p.s = p.sketch == SketchKind::cauchy_dense ? static_cast<Index>(std::ceil(4.0 * k * std::log(k + 1.0) - 1e-9))
                                               : static_cast<Index>(std::min(256.0, std::ceil(4.0 * std::pow(k, 5.0))));
  }
  if (p.s < 1) throw InvalidParams("sketch width must be positive");
  if (p.t == 0) p.t = lewis_budget(p.s);
  return p;
}

namespace {

struct L1Trial {
  FactorTriple factors;
  CostReport cost;
};

L1Trial l1_trial(const Tensor3& a, const L1Params& p, std::uint64_t ts) {
  Dims d = a.dims();
  std::array<Matrix, 2> v;
  std::array<SamplingOperator, 2> t;
  for (int m = 1; m <= 2; ++m) {
    auto i = static_cast<std::size_t>(m - 1);
    SketchSpec spec;
    spec.kind = p.sketch;
    spec.input_dim = m == 1 ? d.n2 * d.n3 : d.n3 * d.n1;
    spec.output_dim = p.s;
    spec.seed = derive_seed(ts, 10 + static_cast<std::uint64_t>(m));
    v[i] = sketch_flattening(a, m, SketchOp(spec));
    t[i] = lewis_sample(v[i], p.t, derive_seed(ts, 20 + static_cast<std::uint64_t>(m)));
  }
  Matrix y1 = t[0].select_rows(v[0]), y2 = t[1].select_rows(v[1]);
  Tensor3 c = mode_apply(a, t[0].mode_op(), t[1].mode_op(), ModeOp());
  const Index s1 = v[0].cols(), s2 = v[1].cols(), t1 = y1.rows(), t2 = y2.rows();
  // Row i + j s1 of B is vec((Y1)_i ⊗ (Y2)_j) in mode-3 flattening order a t2 + b.
  Matrix b(s1 * s2, t1 * t2);
  for (Index j = 0; j < s2; ++j)
    for (Index i = 0; i < s1; ++i)
      for (Index x = 0; x < t1; ++x)
        for (Index y = 0; y < t2; ++y) b(i + j * s1, x * t2 + y) = y1(x, i) * y2(y, j);
  Matrix c3 = flatten(c, 3);
  Matrix w = l1_regression(b, c3, p.irls_iters).W;

  L1Trial out;
  out.factors = FactorTriple::zeros(d, s1 * s2);
  for (Index j = 0; j < s2; ++j)
    for (Index i = 0; i < s1; ++i) {
      out.factors.U.col(i + j * s1) = v[0].col(i);
      out.factors.V.col(i + j * s1) = v[1].col(j);
    }
  out.factors.W = w;
  out.cost = residual_cost(a, out.factors);
  if (out.cost.l1 > a.l1_norm()) {
    out.factors.W.setZero();
    out.cost = {a.fro_norm2(), a.l1_norm()};
  }
  return out;
}

}  // namespace

L1Result l1_bicriteria(const Tensor3& a, const L1Params& params) {
  if (params.k == 0) {
    L1Result out;
    out.factors = FactorTriple::zeros(a.dims(), 0);
    out.cost = {a.fro_norm2(), a.l1_norm()};
    out.trial_costs.assign(static_cast<std::size_t>(std::max(params.trials, 1)), out.cost.l1);
    return out;
  }
  L1Params p = params.resolved();
  std::vector<L1Trial> trials(static_cast<std::size_t>(p.trials));
  parallel_for(p.trials, [&](int i) { trials[static_cast<std::size_t>(i)] = l1_trial(a, p, trial_seed(p.seed, i)); });
  L1Result out;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    out.trial_costs.push_back(trials[i].cost.l1);
    if (trials[i].cost.l1 < trials[static_cast<std::size_t>(out.best_trial)].cost.l1) out.best_trial = static_cast<int>(i);
  }
  out.factors = std::move(trials[static_cast<std::size_t>(out.best_trial)].factors);
  out.cost = trials[static_cast<std::size_t>(out.best_trial)].cost;
  return out;
}

}  // namespace tlra
