#include "tlra/fro_lra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tlra/linalg.hpp"

namespace tlra {

namespace {

Index ceil_index(double x) { return static_cast<Index>(std::ceil(x - 1e-9)); }

enum : std::uint64_t { kColumnSketchTag = 10, kReductionTag = 20, kAlsTag = 30, kRegressionTag = 40 };

// Mode dims other than `mode`, in flattening column order.
Index flat_cols(Dims d, int mode) { return mode == 1 ? d.n2 * d.n3 : mode == 2 ? d.n3 * d.n1 : d.n1 * d.n2; }

template <class Result>
void keep_best(std::vector<Result>& results, std::vector<double>& costs, Result& best, int& best_trial) {
  best_trial = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    costs.push_back(results[i].cost.fro2);
    if (results[i].cost.fro2 < results[static_cast<std::size_t>(best_trial)].cost.fro2) best_trial = static_cast<int>(i);
  }
  best = std::move(results[static_cast<std::size_t>(best_trial)]);
}

}  // namespace

AlgoParams AlgoParams::resolved() const {
  AlgoParams p = *this;
  if (p.k < 0) throw InvalidParams("k must be >= 0");
  if (!std::isfinite(p.eps)) throw InvalidParams("eps must be finite");
  if (p.eps <= 0.0 || p.eps >= 1.0) {
    double c = std::clamp(p.eps, 1e-3, 0.999);
    log_warning("eps=" + std::to_string(p.eps) + " is outside (0,1); using " + std::to_string(c));
    p.eps = c;
  }
  if (p.trials < 1) throw InvalidParams("trials must be >= 1");
  if (p.als_restarts < 1 || p.als_sweeps < 1) throw InvalidParams("ALS restarts and sweeps must be >= 1");
  const double k = static_cast<double>(std::max<Index>(p.k, 1));
  if (p.s == 0) p.s = ceil_index(4.0 * k / p.eps) + 4;
  if (p.t == 0) p.t = ceil_index(10.0 * (k / p.eps) * (k / p.eps));
  if (p.intermediate == 0) p.intermediate = ceil_index(4.0 * (k * k + k / p.eps));
  if (p.w1 == 0) p.w1 = static_cast<int>(2 * p.k + 2);
  if (p.w1 < 2 || p.w2 < 2) throw InvalidParams("hash independence must be >= 2");
  if (p.s < p.k || p.t < p.k) throw InvalidParams("sketch dimensions must be >= k");
  if (p.s < 1 || p.t < 1 || p.intermediate < 1) throw InvalidParams("sketch dimensions must be positive");
  return p;
}

std::uint64_t trial_seed(std::uint64_t root, int trial) { return derive_seed(root, static_cast<std::uint64_t>(trial)); }

PipelineSketches make_pipeline_sketches(Dims dims, const AlgoParams& p, std::uint64_t ts) {
  PipelineSketches out;
  for (int m = 1; m <= 3; ++m) {
    auto i = static_cast<std::size_t>(m - 1);
    SketchSpec& s = out.S[i];
    s.kind = SketchKind::composed;
    s.input_dim = flat_cols(dims, m);
    s.output_dim = p.s;
    s.intermediate_dim = std::max<Index>(1, std::min(p.intermediate, s.input_dim));
    s.seed = derive_seed(ts, kColumnSketchTag + static_cast<std::uint64_t>(m));
    s.hash_independence = s.sign_independence = p.w1;

    SketchSpec& t = out.T[i];
    Index n = dims[m];
    t.input_dim = n;
    t.seed = derive_seed(ts, kReductionTag + static_cast<std::uint64_t>(m));
    t.hash_independence = t.sign_independence = p.w2;
    if (p.reduction_dim(n) == n) {
      t.kind = SketchKind::identity;
      t.output_dim = n;
    } else {
      t.kind = SketchKind::countsketch;
      t.output_dim = p.t;
    }
  }
  return out;
}

Matrix sketch_flattening(const Tensor3& a, int mode, const SketchOp& s) {
  if (a.is_sparse()) return s.apply_right(flatten_sparse(a, mode));
  return s.apply_right(flatten(a, mode));
}

// ---------------------------------------------------------------- reduction

ReducedProblem reduce_problem(const Tensor3& a, const std::array<Matrix, 3>& v, const std::array<SketchSpec, 3>& t) {
  Dims d = a.dims();
  ReducedProblem rp;
  std::array<ModeOp, 3> ops;
  for (int m = 0; m < 3; ++m) {
    auto i = static_cast<std::size_t>(m);
    if (v[i].rows() != d[m + 1]) throw ShapeError("reduce_problem: V_" + std::to_string(m + 1) + " has the wrong row count");
    if (t[i].input_dim != d[m + 1]) throw ShapeError("reduce_problem: T_" + std::to_string(m + 1) + " has the wrong input dimension");
    SketchOp op(t[i]);
    rp.Y[i] = op.apply_left(v[i]);
    ops[i] = op.mode_op();
  }
  rp.C = mode_apply(a, ops[0], ops[1], ops[2]);
  return rp;
}

ReducedProblem reduce_problem(const Tensor3& a, const std::array<Matrix, 3>& v, Index t, std::uint64_t seed) {
  std::array<SketchSpec, 3> specs;
  for (int m = 0; m < 3; ++m) {
    SketchSpec& s = specs[static_cast<std::size_t>(m)];
    Index n = a.dims()[m + 1];
    s.input_dim = n;
    s.seed = derive_seed(seed, kReductionTag + static_cast<std::uint64_t>(m + 1));
    s.kind = t >= n ? SketchKind::identity : SketchKind::countsketch;
    s.output_dim = t >= n ? n : t;
  }
  return reduce_problem(a, v, specs);
}

double reduced_objective(const ReducedProblem& rp, const std::array<Matrix, 3>& x) {
  FactorTriple f{rp.Y[0] * x[0], rp.Y[1] * x[1], rp.Y[2] * x[2]};
  return residual_cost(rp.C, f).fro2;
}

// ---------------------------------------------------------------- ALS

namespace {

struct CoreAls {
  std::array<Matrix, 3> flat;  // flattenings of the projected core
  double norm2 = 0.0;

  // Khatri-Rao matrix whose columns match the mode-m flattening of the core.
  static Matrix kr_for(int m, const std::array<Matrix, 3>& z) {
    if (m == 0) return ImplicitKR{{z[1].transpose(), z[2].transpose()}}.materialize();
    if (m == 1) return ImplicitKR{{z[2].transpose(), z[0].transpose()}}.materialize();
    return ImplicitKR{{z[0].transpose(), z[1].transpose()}}.materialize();
  }

  double objective(const std::array<Matrix, 3>& z) const {
    return (flat[0] - z[0] * kr_for(0, z)).squaredNorm();
  }

  void update(int m, std::array<Matrix, 3>& z) const {
    auto i = static_cast<std::size_t>(m);
    Matrix k = kr_for(m, z);
    Matrix gram = Matrix::Ones(z[0].cols(), z[0].cols());
    for (std::size_t o = 0; o < 3; ++o)
      if (o != i) gram = gram.cwiseProduct(z[o].transpose() * z[o]);
    z[i] = flat[i] * k.transpose() * pinv(gram);
  }
};

std::array<Matrix, 3> hosvd_init(const CoreAls& core, Index k, Rng& rng) {
  std::array<Matrix, 3> z;
  for (std::size_t m = 0; m < 3; ++m) {
    Index r = core.flat[m].rows();
    Matrix u = top_left_singular(core.flat[m], k);
    z[m] = Matrix(r, k);
    for (Index c = 0; c < k; ++c)
      for (Index row = 0; row < r; ++row) z[m](row, c) = c < u.cols() ? u(row, c) : rng.normal();
  }
  return z;
}

std::array<Matrix, 3> random_init(const CoreAls& core, Index k, Rng& rng) {
  std::array<Matrix, 3> z;
  for (std::size_t m = 0; m < 3; ++m) {
    z[m] = Matrix(core.flat[m].rows(), k);
    for (Index c = 0; c < k; ++c)
      for (Index row = 0; row < z[m].rows(); ++row) z[m](row, c) = rng.normal();
  }
  return z;
}

}  // namespace

AlsResult rank_k_als(const ReducedProblem& rp, Index k, int restarts, int sweeps, std::uint64_t seed) {
  if (k < 0) throw InvalidParams("k must be >= 0");
  Dims cd = rp.C.dims();
  for (int m = 0; m < 3; ++m)
    if (rp.Y[static_cast<std::size_t>(m)].rows() != cd[m + 1]) throw ShapeError("rank_k_als: Y and C disagree");
  AlsResult best;
  const double c2 = rp.C.fro_norm2();
  if (k == 0) {
    for (std::size_t m = 0; m < 3; ++m) best.X[m] = Matrix::Zero(rp.Y[m].cols(), 0);
    best.objective = c2;
    return best;
  }
  // Work in orthonormal coordinates of each Y_i: the objective splits into a
  // constant outside the span plus an ordinary CP problem on the projected core.
  std::array<Matrix, 3> q, r;
  for (std::size_t m = 0; m < 3; ++m) {
    q[m] = orthonormal_basis(rp.Y[m]);
    r[m] = q[m].transpose() * rp.Y[m];
  }
  for (std::size_t m = 0; m < 3; ++m) {
    if (q[m].cols() == 0) {
      for (std::size_t o = 0; o < 3; ++o) best.X[o] = Matrix::Zero(rp.Y[o].cols(), k);
      best.objective = c2;
      return best;
    }
  }
  Tensor3 core = mode_apply(rp.C, q[0], q[1], q[2]);
  CoreAls als;
  for (int m = 1; m <= 3; ++m) als.flat[static_cast<std::size_t>(m - 1)] = flatten(core, m);
  als.norm2 = core.fro_norm2();
  const double outside = std::max(0.0, c2 - als.norm2);

  double best_obj = std::numeric_limits<double>::infinity();
  std::array<Matrix, 3> best_z;
  for (int rs = 0; rs < restarts; ++rs) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(rs)));
    std::array<Matrix, 3> z = rs == 0 ? hosvd_init(als, k, rng) : random_init(als, k, rng);
    std::vector<double> trace;
    double prev = als.objective(z);
    trace.push_back(prev);
    for (int sw = 0; sw < sweeps; ++sw) {
      for (int m = 0; m < 3; ++m) {
        als.update(m, z);
        trace.push_back(als.objective(z));
      }
      double cur = trace.back();
      if (cur <= 1e-30 * std::max(als.norm2, 1e-300) || prev - cur <= 1e-12 * prev) break;
      prev = cur;
    }
    // Objectives within rounding of each other count as ties and keep the earlier
    // restart, so inputs that differ only by rounding pick the same restart.
    if (trace.back() < best_obj - 1e-10 * als.norm2) {
      best_obj = trace.back();
      best_z = z;
      best.trace = trace;
      best.best_restart = rs;
    }
  }
  for (std::size_t m = 0; m < 3; ++m) best.X[m] = pinv(r[m]) * best_z[m];
  for (double& v : best.trace) v += outside;
  best.objective = best_obj + outside;
  return best;
}

// ---------------------------------------------------------------- regression

Matrix tensor_multiple_regression(const Matrix& aflat, const Matrix& u, const Matrix& v, double eps, std::uint64_t seed,
                                  Index m) {
  if (u.cols() != v.cols()) throw ShapeError("tensor_multiple_regression: U and V column counts differ");
  const Index na = u.rows(), nb = v.rows(), k = u.cols();
  if (aflat.cols() != na * nb) throw ShapeError("tensor_multiple_regression: A has the wrong column count");
  if (k == 0) return Matrix::Zero(aflat.rows(), 0);
  if (!(eps > 0.0)) throw InvalidParams("eps must be positive");
  if (m <= 0) m = ceil_index(8.0 * (static_cast<double>(k * k) + static_cast<double>(k) / eps));
  ImplicitKR b{{u.transpose(), v.transpose()}};
  if (m >= na * nb) return aflat * pinv(b.materialize());
  TensorSketchOp ts({na, nb}, m, seed);
  return ts.apply_rows(aflat) * pinv(ts.apply_kr(b));
}

// ---------------------------------------------------------------- bicriteria

namespace {

// Quadratic solution as a Tucker form: core(i, j, :) is column i + j*s1 of W-hat.
struct QuadTrial {
  TuckerForm tucker;
  CostReport cost;
};

QuadTrial quadratic_trial(const Tensor3& a, const AlgoParams& p, std::uint64_t ts) {
  Dims d = a.dims();
  PipelineSketches sk = make_pipeline_sketches(d, p, ts);
  Matrix v1 = sketch_flattening(a, 1, SketchOp(sk.S[0]));
  Matrix v2 = sketch_flattening(a, 2, SketchOp(sk.S[1]));
  const Index s1 = v1.cols(), s2 = v2.cols();
  Tensor3 core;
  if (p.approach == RegressionApproach::reduced) {
    SketchOp t1(sk.T[0]), t2(sk.T[1]);
    Tensor3 c = mode_apply(a, t1.mode_op(), t2.mode_op(), ModeOp());
    Matrix pp = pinv(t1.apply_left(v1)), pq = pinv(t2.apply_left(v2));
    // min_X ||X ((T1 U)^T ⊙ (T2 V)^T) - C_3|| has the Kronecker-structured
    // minimum-norm solution C(P^+T, Q^+T, I).
    core = mode_apply(c, Matrix(pp.transpose()), Matrix(pq.transpose()), ModeOp());
  } else {
    const Index r = s1 * s2;
    Matrix uh(d.n1, r), vh(d.n2, r);
    for (Index j = 0; j < s2; ++j)
      for (Index i = 0; i < s1; ++i) {
        uh.col(i + j * s1) = v1.col(i);
        vh.col(i + j * s1) = v2.col(j);
      }
    Index m = p.ts_dim;
    if (m <= 0) {
      double rr = static_cast<double>(r);
      m = ceil_index(8.0 * ((p.quadratic_ts_dim ? rr * rr : rr) + rr / p.eps));
    }
    Matrix a3 = a.is_sparse() ? Matrix(flatten_sparse(a, 3)) : flatten(a, 3);
    Matrix w = tensor_multiple_regression(a3, uh, vh, p.eps, derive_seed(ts, kRegressionTag), m);
    core = Tensor3::zeros({s1, s2, d.n3});
    for (Index i = 0; i < s1; ++i)
      for (Index j = 0; j < s2; ++j)
        for (Index l = 0; l < d.n3; ++l) core.at(i, j, l) = w(l, i + j * s1);
  }
  QuadTrial out{TuckerForm{std::move(core), std::move(v1), std::move(v2), Matrix::Identity(d.n3, d.n3)}, {}};
  out.cost = residual_cost(a, out.tucker);
  if (out.cost.fro2 > a.fro_norm2()) {
    out.tucker.core = Tensor3::zeros(out.tucker.core.dims());
    out.cost = {a.fro_norm2(), a.l1_norm()};
  }
  return out;
}

FactorTriple quadratic_factors(const TuckerForm& t) {
  Dims s = t.core.dims();
  const Index s1 = s.n1, s2 = s.n2, r = s1 * s2;
  FactorTriple f = FactorTriple::zeros(t.dims(), r);
  for (Index j = 0; j < s2; ++j)
    for (Index i = 0; i < s1; ++i) {
      Index c = i + j * s1;
      f.U.col(c) = t.P.col(i);
      f.V.col(c) = t.Q.col(j);
      for (Index l = 0; l < s.n3; ++l) f.W(l, c) = t.core(i, j, l);
    }
  return f;
}

}  // namespace

FroResult bicriteria_quadratic(const Tensor3& a, const AlgoParams& params) {
  AlgoParams p = params.resolved();
  if (p.k == 0) {
    FroResult out;
    out.factors = FactorTriple::zeros(a.dims(), 0);
    out.cost = {a.fro_norm2(), a.l1_norm()};
    out.trial_costs.assign(static_cast<std::size_t>(p.trials), out.cost.fro2);
    return out;
  }
  std::vector<QuadTrial> trials(static_cast<std::size_t>(p.trials));
  parallel_for(p.trials, [&](int i) { trials[static_cast<std::size_t>(i)] = quadratic_trial(a, p, trial_seed(p.seed, i)); });
  QuadTrial best;
  FroResult out;
  keep_best(trials, out.trial_costs, best, out.best_trial);
  out.factors = quadratic_factors(best.tucker);
  out.cost = best.cost;
  return out;
}

TuckerForm cubic_from_reduced(const std::array<Matrix, 3>& v, const ReducedProblem& rp) {
  // alpha = C(Y1^+T, Y2^+T, Y3^+T) minimizes ||alpha(Y1^T, Y2^T, Y3^T) - C||.
  Tensor3 alpha = mode_apply(rp.C, Matrix(pinv(rp.Y[0]).transpose()), Matrix(pinv(rp.Y[1]).transpose()),
                             Matrix(pinv(rp.Y[2]).transpose()));
  return TuckerForm{std::move(alpha), v[0], v[1], v[2]};
}

namespace {

struct CubicTrial {
  TuckerForm tucker;
  CostReport cost;
};

CubicTrial cubic_trial(const Tensor3& a, const AlgoParams& p, std::uint64_t ts) {
  PipelineSketches sk = make_pipeline_sketches(a.dims(), p, ts);
  std::array<Matrix, 3> v;
  for (int m = 0; m < 3; ++m) v[static_cast<std::size_t>(m)] = sketch_flattening(a, m + 1, SketchOp(sk.S[static_cast<std::size_t>(m)]));
  ReducedProblem rp = reduce_problem(a, v, sk.T);
  CubicTrial out{cubic_from_reduced(v, rp), {}};
  out.cost = residual_cost(a, out.tucker);
  if (out.cost.fro2 > a.fro_norm2()) {
    out.tucker.core = Tensor3::zeros(out.tucker.core.dims());
    out.cost = {a.fro_norm2(), a.l1_norm()};
  }
  return out;
}

}  // namespace

CubicResult bicriteria_cubic(const Tensor3& a, const AlgoParams& params) {
  AlgoParams p = params.resolved();
  if (p.k == 0) {
    Dims d = a.dims();
    CubicResult out;
    out.tucker = {Tensor3::zeros({0, 0, 0}), Matrix::Zero(d.n1, 0), Matrix::Zero(d.n2, 0), Matrix::Zero(d.n3, 0)};
    out.cost = {a.fro_norm2(), a.l1_norm()};
    out.trial_costs.assign(static_cast<std::size_t>(p.trials), out.cost.fro2);
    return out;
  }
  std::vector<CubicTrial> trials(static_cast<std::size_t>(p.trials));
  parallel_for(p.trials, [&](int i) { trials[static_cast<std::size_t>(i)] = cubic_trial(a, p, trial_seed(p.seed, i)); });
  CubicTrial best;
  CubicResult out;
  keep_best(trials, out.trial_costs, best, out.best_trial);
  out.tucker = std::move(best.tucker);
  out.cost = best.cost;
  return out;
}

// ---------------------------------------------------------------- rank k

FactorTriple expand_rank_k(const std::array<Matrix, 3>& v, const std::array<Matrix, 3>& x) {
  return {v[0] * x[0], v[1] * x[1], v[2] * x[2]};
}

AlsResult rank_k_for_trial(const ReducedProblem& rp, const AlgoParams& p, std::uint64_t ts) {
  return rank_k_als(rp, p.k, p.als_restarts, p.als_sweeps, derive_seed(ts, kAlsTag));
}

namespace {

struct RankKTrial {
  FactorTriple factors;
  CostReport cost;
};

RankKTrial rank_k_trial(const Tensor3& a, const AlgoParams& p, std::uint64_t ts) {
  PipelineSketches sk = make_pipeline_sketches(a.dims(), p, ts);
  std::array<Matrix, 3> v;
  for (int m = 0; m < 3; ++m) v[static_cast<std::size_t>(m)] = sketch_flattening(a, m + 1, SketchOp(sk.S[static_cast<std::size_t>(m)]));
  ReducedProblem rp = reduce_problem(a, v, sk.T);
  AlsResult als = rank_k_for_trial(rp, p, ts);
  RankKTrial out{expand_rank_k(v, als.X), {}};
  out.cost = residual_cost(a, out.factors);
  return out;
}

}  // namespace

FroResult fro_rank_k(const Tensor3& a, const AlgoParams& params) {
  AlgoParams p = params.resolved();
  FroResult out;
  if (p.k == 0) {
    out.factors = FactorTriple::zeros(a.dims(), 0);
    out.cost = {a.fro_norm2(), a.l1_norm()};
    out.trial_costs.assign(static_cast<std::size_t>(p.trials), out.cost.fro2);
    return out;
  }
  std::vector<RankKTrial> trials(static_cast<std::size_t>(p.trials));
  parallel_for(p.trials, [&](int i) { trials[static_cast<std::size_t>(i)] = rank_k_trial(a, p, trial_seed(p.seed, i)); });
  RankKTrial best;
  keep_best(trials, out.trial_costs, best, out.best_trial);
  out.factors = std::move(best.factors);
  out.cost = best.cost;
  return out;
}

}  // namespace tlra
