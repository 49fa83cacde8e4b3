#include "tlra/curt.hpp"

#include <algorithm>
#include <cmath>

#include "tlra/fro_lra.hpp"
#include "tlra/linalg.hpp"
#include "tlra/sketch.hpp"

namespace tlra {

namespace {

// Leverage scores of m, or a uniform vector when m carries no mass.
Vector leverage_or_uniform(const Matrix& m) {
  Vector lev = leverage_scores(m);
  if (!(lev.sum() > 0.0)) lev = Vector::Ones(m.rows());
  return lev;
}

// Column (slow, fast) of a flattening whose columns are slow * n_fast + fast.
Vector product_distribution(const Vector& slow, const Vector& fast) {
  Vector p(slow.size() * fast.size());
  for (Index a = 0; a < slow.size(); ++a) p.segment(a * fast.size(), fast.size()) = slow(a) * fast;
  return p;
}

// d samples from `probs`, or every column when d reaches the domain size.
SamplingOperator sample_or_all(const Vector& probs, Index d, std::uint64_t seed) {
  if (d >= probs.size()) return SamplingOperator::identity(probs.size());
  return sample_operator(probs, d, seed);
}

SamplingOperator kr_sample_or_uniform(const std::vector<Matrix>& factors, Index d, std::uint64_t seed, double eps0) {
  try {
    return kr_leverage_sample(factors, d, seed, eps0);
  } catch (const DegenerateInputError&) {
    Index dom = 1;
    for (const Matrix& f : factors) dom *= f.cols();
    return sample_operator(Vector::Ones(dom), d, seed);
  }
}

// Columns of U_1 ⊙ U_2 (U_t is k x n_t) picked by `sel` and scaled by its weights.
Matrix selected_kr_cols(const Matrix& slow, const Matrix& fast, const SamplingOperator& sel) {
  Matrix out(slow.rows(), sel.count());
  for (Index r = 0; r < sel.count(); ++r) {
    Index c = sel.indices[static_cast<std::size_t>(r)];
    out.col(r) = sel.weights[static_cast<std::size_t>(r)] * slow.col(c / fast.cols()).cwiseProduct(fast.col(c % fast.cols()));
  }
  return out;
}

}  // namespace

Matrix gather_fibers(const Tensor3& a, int mode, const SamplingOperator& sel, bool weighted) {
  Dims d = a.dims();
  Index width = mode == 1 ? d.n2 * d.n3 : mode == 2 ? d.n3 * d.n1 : d.n1 * d.n2;
  if (mode < 1 || mode > 3) throw InvalidParams("mode must be 1, 2 or 3");
  if (sel.source_dim != width) throw ShapeError("selection does not match the flattening width");
  Matrix out(d[mode], sel.count());
  for (Index r = 0; r < sel.count(); ++r) {
    Index c = sel.indices[static_cast<std::size_t>(r)];
    double w = weighted ? sel.weights[static_cast<std::size_t>(r)] : 1.0;
    for (Index x = 0; x < d[mode]; ++x) {
      double v = mode == 1 ? a(x, c / d.n3, c % d.n3) : mode == 2 ? a(c % d.n1, x, c / d.n1) : a(c / d.n2, c % d.n2, x);
      out(x, r) = w * v;
    }
  }
  return out;
}

Index leverage_budget(double k, double eps, double c) {
  if (!(eps > 0.0) || !(c > 0.0)) throw InvalidParams("budget needs positive eps and c");
  double v = c * (k * log_or_zero(k) + k / eps);
  return static_cast<Index>(std::ceil(std::min(v, 1e15) - 1e-9));
}

// ---------------------------------------------------------------- selection

CrtSelection crt_select(const Tensor3& a, const CrtParams& params) {
  if (params.k < 1) throw InvalidParams("k must be >= 1");
  if (!(params.eps > 0.0 && params.eps < 1.0)) throw InvalidParams("eps must be in (0,1)");
  Dims d = a.dims();
  const Index s = params.s > 0 ? params.s : static_cast<Index>(std::ceil(4.0 * static_cast<double>(params.k) / params.eps)) + 4;

  Matrix b[2];
  for (int m = 1; m <= 2; ++m) {
    SketchSpec spec;
    spec.kind = SketchKind::gaussian;
    spec.input_dim = m == 1 ? d.n2 * d.n3 : d.n3 * d.n1;
    spec.output_dim = s;
    spec.seed = derive_seed(params.seed, static_cast<std::uint64_t>(m));
    b[m - 1] = sketch_flattening(a, m, SketchOp(spec));
  }

  CrtSelection out;
  auto budget = [&](int mode, double z, Index width) {
    Index want = leverage_budget(z, params.eps, params.c);
    Index limit = params.cap > 0 ? std::min(params.cap, width) : width;
    out.budget[static_cast<std::size_t>(mode - 1)] = want;
    out.capped[static_cast<std::size_t>(mode - 1)] = want > limit;
    return std::min(want, limit);
  };
  const double sd = static_cast<double>(s);

  // Mode 3: the design rows (A1S1)_a ⊗ (A2S2)_b form a Kronecker product, whose
  // leverage scores are products of the per-factor scores.
  Index d3 = budget(3, sd * sd, d.n1 * d.n2);
  out.tubes = sample_or_all(product_distribution(leverage_or_uniform(b[0]), leverage_or_uniform(b[1])), d3,
                            derive_seed(params.seed, 13));
  out.T = gather_fibers(a, 3, out.tubes);

  Index d2 = budget(2, sd * static_cast<double>(out.tubes.count()), d.n3 * d.n1);
  out.rows = sample_or_all(product_distribution(leverage_or_uniform(out.T), leverage_or_uniform(b[0])), d2,
                           derive_seed(params.seed, 12));
  out.R = gather_fibers(a, 2, out.rows);

  Index d1 = budget(1, static_cast<double>(out.rows.count()) * static_cast<double>(out.tubes.count()), d.n2 * d.n3);
  out.cols = sample_or_all(product_distribution(leverage_or_uniform(out.R), leverage_or_uniform(out.T)), d1,
                           derive_seed(params.seed, 11));
  out.C = gather_fibers(a, 1, out.cols);
  return out;
}

CrtFit crt_fit(const Tensor3& a, const Matrix& c, const Matrix& r, const Matrix& t) {
  Dims d = a.dims();
  if (c.rows() != d.n1 || r.rows() != d.n2 || t.rows() != d.n3) throw ShapeError("crt_fit: fiber lengths do not match A");
  Matrix q1 = orthonormal_basis(c), q2 = orthonormal_basis(r), q3 = orthonormal_basis(t);
  CrtFit fit;
  fit.tucker = TuckerForm{mode_apply(a, q1, q2, q3), q1, q2, q3};
  fit.cost = residual_cost(a, fit.tucker);
  return fit;
}

// ---------------------------------------------------------------- CURT

namespace {

CurtResult curt_trial(const Tensor3& a, const FactorTriple& f, Index dsz, const CurtParams& p, std::uint64_t ts) {
  CurtResult out;
  Matrix ut = f.U.transpose(), vt = f.V.transpose(), wt = f.W.transpose();

  // A1 columns are indexed j*n3 + l, so V is the slow factor.
  out.cols = kr_sample_or_uniform({vt, wt}, dsz, derive_seed(ts, 1), p.eps0);
  out.C = gather_fibers(a, 1, out.cols);
  out.P1 = pinv(selected_kr_cols(vt, wt, out.cols));
  Matrix uhat_t = (out.C * out.P1).transpose();

  out.rows = kr_sample_or_uniform({wt, uhat_t}, dsz, derive_seed(ts, 2), p.eps0);
  out.R = gather_fibers(a, 2, out.rows);
  out.P2 = pinv(selected_kr_cols(wt, uhat_t, out.rows));
  Matrix vhat_t = (out.R * out.P2).transpose();

  out.tubes = kr_sample_or_uniform({uhat_t, vhat_t}, dsz, derive_seed(ts, 3), p.eps0);
  out.T = gather_fibers(a, 3, out.tubes);
  out.P3 = pinv(selected_kr_cols(uhat_t, vhat_t, out.tubes));

  out.cost = residual_cost(a, out.factors());
  if (out.cost.fro2 > a.fro_norm2()) {
    out.P1.setZero();
    out.P2.setZero();
    out.P3.setZero();
    out.cost = {a.fro_norm2(), a.l1_norm()};
  }
  return out;
}

}  // namespace

CurtResult curt_decompose(const Tensor3& a, const FactorTriple& f, const CurtParams& params) {
  f.check();
  if (f.dims() != a.dims()) throw ShapeError("curt_decompose: factor dims do not match A");
  if (params.trials < 1) throw InvalidParams("trials must be >= 1");
  const Index k = f.rank();
  if (k == 0) {
    CurtResult out;
    out.cost = {a.fro_norm2(), a.l1_norm()};
    out.trial_costs.assign(static_cast<std::size_t>(params.trials), out.cost.fro2);
    return out;
  }
  const Index dsz = params.d > 0 ? params.d : leverage_budget(static_cast<double>(k), params.eps, params.c);
  std::vector<CurtResult> trials(static_cast<std::size_t>(params.trials));
  parallel_for(params.trials, [&](int i) {
    trials[static_cast<std::size_t>(i)] = curt_trial(a, f, dsz, params, derive_seed(params.seed, static_cast<std::uint64_t>(i)));
  });
  int best = 0;
  std::vector<double> costs;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    costs.push_back(trials[i].cost.fro2);
    if (trials[i].cost.fro2 < trials[static_cast<std::size_t>(best)].cost.fro2) best = static_cast<int>(i);
  }
  CurtResult out = std::move(trials[static_cast<std::size_t>(best)]);
  out.best_trial = best;
  out.trial_costs = std::move(costs);
  return out;
}

// ---------------------------------------------------------------- matrix CUR

RowSubset generalized_row_subset(const Matrix& m, const Matrix& c, double eps, std::uint64_t seed, Index r) {
  if (c.rows() != m.rows()) throw ShapeError("generalized_row_subset: C and M row counts differ");
  if (m.rows() == 0) throw ShapeError("generalized_row_subset: empty input");
  if (r <= 0) r = leverage_budget(static_cast<double>(std::max<Index>(c.cols(), 1)), eps);
  RowSubset out;
  out.rows = sample_operator(c.cols() ? leverage_or_uniform(c) : Vector(Vector::Ones(m.rows())), r, seed);
  out.R = out.rows.select_rows(m);
  // Sampled regression: Y R = (S C)^+ S M.
  out.Y = pinv(out.rows.select_rows(c));
  return out;
}

CurResult matrix_cur(const Matrix& m, Index k, double eps, std::uint64_t seed) {
  if (k < 0 || k > std::min(m.rows(), m.cols())) throw InvalidParams("matrix_cur: k must be in [0, min(rows, cols)]");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidParams("eps must be in (0,1)");
  CurResult out;
  if (k == 0) {
    out.C = Matrix::Zero(m.rows(), 0);
    out.U = Matrix::Zero(0, 0);
    out.R = Matrix::Zero(0, m.cols());
    out.cols.source_dim = m.cols();
    out.rows.source_dim = m.rows();
    out.cost = m.squaredNorm();
    return out;
  }
  // Approximate top-k column space from a sketch of the columns.
  SketchSpec spec;
  spec.kind = SketchKind::composed;
  spec.input_dim = m.cols();
  spec.output_dim = std::min<Index>(m.cols(), static_cast<Index>(std::ceil(4.0 * static_cast<double>(k) / eps)) + 4);
  spec.seed = derive_seed(seed, 1);
  Matrix q = orthonormal_basis(SketchOp(spec).apply_right(m));
  Matrix uhat = q * top_left_singular(q.transpose() * m, k);

  RowSubset rs = generalized_row_subset(m, uhat, eps, derive_seed(seed, 2));
  Matrix vhat = orthonormal_basis((rs.Y * rs.R).transpose());
  out.rows = rs.rows;
  out.R = rs.R;
  if (vhat.cols() == 0) {
    out.cols = sample_operator(Vector::Ones(m.cols()), 1, derive_seed(seed, 3));
    out.C = out.cols.select_cols(m);
    out.U = Matrix::Zero(1, out.R.rows());
  } else {
    // Mirror on M^T with the row-space basis, then rewrite vhat^T = (vhat^T R^+) R.
    RowSubset cs = generalized_row_subset(m.transpose(), vhat, eps, derive_seed(seed, 3));
    out.cols = cs.rows;
    out.C = cs.R.transpose();
    out.U = cs.Y.transpose() * (vhat.transpose() * pinv(rs.R));
  }
  out.cost = (out.C * out.U * out.R - m).squaredNorm();
  return out;
}

}  // namespace tlra
