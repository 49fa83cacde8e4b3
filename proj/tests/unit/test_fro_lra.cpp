#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "tlra/fro_lra.hpp"
#include "tlra/linalg.hpp"
#include "tlra/planted.hpp"

using namespace tlra;

namespace {

double rel_residual(const Tensor3& a, const CostReport& c) { return std::sqrt(c.fro2) / a.fro_norm(); }

std::array<Matrix, 3> random_triple(Dims d, Index b, std::mt19937_64& g) {
  return {oracle::random_matrix(d.n1, b, g), oracle::random_matrix(d.n2, b, g), oracle::random_matrix(d.n3, b, g)};
}

}  // namespace

TEST_CASE("planted generator hits the requested noise ratio") {
  PlantedTensor p = planted_gaussian({10, 11, 12}, 3, 0.1, 5);
  Tensor3 low = eval_factors(p.factors);
  CHECK(std::abs(p.perturbation.fro_norm() / low.fro_norm() - 0.1) <= 1e-12);
  CHECK((p.tensor - low - p.perturbation).fro_norm() <= 1e-12 * p.tensor.fro_norm());

  PlantedTensor o = planted_outliers({10, 10, 10}, 2, 0.01, 100.0, 3);
  CHECK(o.perturbation.nnz() == 10);
  CHECK(std::abs(o.perturbation.l1_norm() - 1000.0) <= 1e-9);
}

TEST_CASE("reduce_problem") {
  std::mt19937_64 g(11);
  Dims d{5, 6, 7};
  Tensor3 a = oracle::random_tensor(d, g);
  auto v = random_triple(d, 3, g);

  SUBCASE("widths covering the modes give the identity") {
    ReducedProblem rp = reduce_problem(a, v, 100, 1);
    CHECK((rp.C - a).fro_norm() == 0.0);
    for (std::size_t m = 0; m < 3; ++m) CHECK((rp.Y[m] - v[m]).norm() == 0.0);
  }
  SUBCASE("zero input gives a zero core") {
    ReducedProblem rp = reduce_problem(Tensor3::zeros(d), v, 3, 1);
    CHECK(rp.C.fro_norm() == 0.0);
    CHECK(rp.C.dims() == Dims{3, 3, 3});
  }
  SUBCASE("core matches the six-loop contraction") {
    std::array<SketchSpec, 3> specs;
    std::array<Matrix, 3> dense;
    for (int m = 0; m < 3; ++m) {
      auto i = static_cast<std::size_t>(m);
      specs[i].kind = SketchKind::countsketch;
      specs[i].input_dim = d[m + 1];
      specs[i].output_dim = 4;
      specs[i].seed = 77 + static_cast<std::uint64_t>(m);
      dense[i] = SketchOp(specs[i]).dense();
    }
    ReducedProblem rp = reduce_problem(a, v, specs);
    Tensor3 ref = oracle::triple_sum(a, dense[0].transpose(), dense[1].transpose(), dense[2].transpose());
    CHECK((rp.C - ref).fro_norm() <= 1e-12 * ref.fro_norm());
    for (std::size_t m = 0; m < 3; ++m) CHECK((rp.Y[m] - dense[m] * v[m]).norm() <= 1e-12 * v[m].norm());
  }
  SUBCASE("shape errors") {
    auto bad = v;
    bad[1] = Matrix::Zero(2, 3);
    CHECK_THROWS_AS(reduce_problem(a, bad, 3, 1), ShapeError);
  }
}

TEST_CASE("reduce_problem preserves the objective") {
  // At n=20 the default width ceil(40 k^2/eps^2) already covers each mode.
  const Index k = 1;
  const double eps = 0.5;
  const auto t = static_cast<Index>(std::ceil(40.0 * k * k / (eps * eps)));
  int ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 g(static_cast<std::uint64_t>(seed));
    Dims d{20, 20, 20};
    Tensor3 a = oracle::random_tensor(d, g);
    auto v = random_triple(d, 2, g);
    ReducedProblem rp = reduce_problem(a, v, t, static_cast<std::uint64_t>(seed));
    std::array<Matrix, 3> x{oracle::random_matrix(2, k, g), oracle::random_matrix(2, k, g), oracle::random_matrix(2, k, g)};
    double orig = residual_cost(a, expand_rank_k(v, x)).fro2;
    if (std::abs(reduced_objective(rp, x) - orig) <= eps * orig) ++ok;
  }
  CHECK(ok >= 90);

  // A width below n, so CountSketch actually compresses every mode.
  ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 g(1000 + static_cast<std::uint64_t>(seed));
    Dims d{60, 60, 60};
    Tensor3 a = oracle::random_tensor(d, g);
    auto v = random_triple(d, 2, g);
    ReducedProblem rp = reduce_problem(a, v, 50, static_cast<std::uint64_t>(seed));
    std::array<Matrix, 3> x{oracle::random_matrix(2, 1, g), oracle::random_matrix(2, 1, g), oracle::random_matrix(2, 1, g)};
    double orig = residual_cost(a, expand_rank_k(v, x)).fro2;
    if (std::abs(reduced_objective(rp, x) - orig) <= 0.9 * orig) ++ok;
  }
  CHECK(ok >= 90);
}

TEST_CASE("tensor_multiple_regression") {
  std::mt19937_64 g(3);
  const Index d = 10, na = 8, nb = 8, k = 2;
  Matrix u = oracle::random_matrix(na, k, g), v = oracle::random_matrix(nb, k, g);
  Matrix b = oracle::khatri_rao(u.transpose(), v.transpose());  // k x (na nb), column a*nb + b

  SUBCASE("consistent system") {
    Matrix w0 = oracle::random_matrix(d, k, g);
    Matrix aflat = w0 * b;
    for (Index m : {Index{0}, Index{20}}) {
      Matrix w = tensor_multiple_regression(aflat, u, v, 0.5, 9, m);
      CHECK((w * b - aflat).norm() <= 1e-8 * aflat.norm());
    }
  }
  SUBCASE("zero input") {
    Matrix w = tensor_multiple_regression(Matrix::Zero(d, na * nb), u, v, 0.5, 9, 20);
    CHECK(w.norm() == 0.0);
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(tensor_multiple_regression(Matrix::Zero(d, 7), u, v, 0.5, 9), ShapeError);
    CHECK_THROWS_AS(tensor_multiple_regression(Matrix::Zero(d, 64), u, Matrix::Zero(nb, 3), 0.5, 9), ShapeError);
  }
  SUBCASE("close to exact least squares") {
    for (Index m : {Index{0}, Index{40}}) {
      int ok = 0;
      for (int seed = 0; seed < 100; ++seed) {
        std::mt19937_64 h(100 + static_cast<std::uint64_t>(seed));
        Matrix uu = oracle::random_matrix(na, k, h), vv = oracle::random_matrix(nb, k, h);
        Matrix bb = oracle::khatri_rao(uu.transpose(), vv.transpose());
        Matrix aflat = oracle::random_matrix(d, na * nb, h);
        // Normal equations on the materialized design.
        Matrix wopt = (bb * bb.transpose()).ldlt().solve(bb * aflat.transpose()).transpose();
        double best = (wopt * bb - aflat).norm();
        Matrix w = tensor_multiple_regression(aflat, uu, vv, 0.5, static_cast<std::uint64_t>(seed), m);
        if ((w * bb - aflat).norm() <= 1.5 * best) ++ok;
      }
      CHECK(ok >= 90);
    }
  }
}

TEST_CASE("bicriteria_quadratic") {
  SUBCASE("exact low rank is recovered") {
    int ok = 0;
    for (int seed = 0; seed < 10; ++seed) {
      PlantedTensor p = planted_gaussian({40, 40, 40}, 4, 0.0, static_cast<std::uint64_t>(seed));
      AlgoParams prm;
      prm.k = 4;
      prm.trials = 1;
      prm.seed = static_cast<std::uint64_t>(seed);
      FroResult r = bicriteria_quadratic(p.tensor, prm);
      AlgoParams res = prm.resolved();
      CHECK(r.factors.rank() == res.s * res.s);
      if (rel_residual(p.tensor, r.cost) <= 1e-6) ++ok;
    }
    CHECK(ok >= 9);
  }
  SUBCASE("sketched regression route") {
    PlantedTensor p = planted_gaussian({12, 12, 12}, 2, 0.0, 4);
    AlgoParams prm;
    prm.k = 2;
    prm.s = 4;
    prm.trials = 1;
    prm.approach = RegressionApproach::sketched;
    prm.ts_dim = 100;
    FroResult r = bicriteria_quadratic(p.tensor, prm);
    CHECK(r.factors.rank() == 16);
    CHECK(rel_residual(p.tensor, r.cost) <= 1e-6);
  }
  SUBCASE("planted plus noise") {
    PlantedTensor p = planted_gaussian({30, 30, 30}, 3, 0.1, 21);
    AlgoParams prm;
    prm.k = 3;
    prm.seed = 5;
    FroResult r = bicriteria_quadratic(p.tensor, prm);
    CHECK(r.trial_costs.size() == 9);
    CHECK(r.cost.fro2 <= 1.5 * p.perturbation.fro_norm2());
    CHECK(std::abs(r.cost.fro2 - oracle::residual_fro2(p.tensor, r.factors.U, r.factors.V, r.factors.W)) <=
          1e-8 * p.tensor.fro_norm2());
  }
  SUBCASE("columns of U lie in the span of the sketched flattening") {
    std::mt19937_64 g(8);
    Tensor3 a = oracle::random_tensor({9, 8, 7}, g);
    AlgoParams prm;
    prm.k = 1;
    prm.s = 3;
    prm.trials = 1;
    FroResult r = bicriteria_quadratic(a, prm);
    PipelineSketches sk = make_pipeline_sketches(a.dims(), prm.resolved(), trial_seed(0, 0));
    Matrix v1 = sketch_flattening(a, 1, SketchOp(sk.S[0]));
    Matrix q = orthonormal_basis(v1);
    CHECK((r.factors.U - q * (q.transpose() * r.factors.U)).norm() <= 1e-10 * r.factors.U.norm());
    CHECK(r.cost.fro2 <= a.fro_norm2());
  }
}

TEST_CASE("bicriteria_cubic") {
  SUBCASE("exact low rank is recovered") {
    PlantedTensor p = planted_gaussian({20, 20, 20}, 3, 0.0, 2);
    AlgoParams prm;
    prm.k = 3;
    prm.trials = 2;
    CubicResult r = bicriteria_cubic(p.tensor, prm);
    CHECK(rel_residual(p.tensor, r.cost) <= 1e-6);
    Index s = prm.resolved().s;
    CHECK(r.rank() == s * s * s);
    CHECK(r.compressed().rank() == s * s);
  }
  SUBCASE("coefficients match the materialized normal equations") {
    std::mt19937_64 g(13);
    Dims d{4, 4, 4};
    Tensor3 a = oracle::random_tensor(d, g);
    AlgoParams prm;
    prm.k = 1;
    prm.s = 2;
    prm.trials = 1;
    CubicResult r = bicriteria_cubic(a, prm);
    const Matrix &y1 = r.tucker.P, &y2 = r.tucker.Q, &y3 = r.tucker.R;
    REQUIRE(y1.cols() == 2);
    Matrix z(d.size(), 8);
    Vector rhs(d.size());
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j)
        for (Index l = 0; l < 4; ++l) {
          Index row = (i * 4 + j) * 4 + l;
          rhs(row) = a(i, j, l);
          for (Index p = 0; p < 2; ++p)
            for (Index q = 0; q < 2; ++q)
              for (Index c = 0; c < 2; ++c) z(row, (p * 2 + q) * 2 + c) = y1(i, p) * y2(j, q) * y3(l, c);
        }
    Vector alpha = (z.transpose() * z).ldlt().solve(z.transpose() * rhs);
    for (Index p = 0; p < 2; ++p)
      for (Index q = 0; q < 2; ++q)
        for (Index c = 0; c < 2; ++c)
          CHECK(std::abs(r.tucker.core(p, q, c) - alpha((p * 2 + q) * 2 + c)) <= 1e-8 * alpha.norm());
  }
  SUBCASE("planted plus noise") {
    PlantedTensor p = planted_gaussian({24, 24, 24}, 2, 0.1, 31);
    AlgoParams prm;
    prm.k = 2;
    CubicResult r = bicriteria_cubic(p.tensor, prm);
    CHECK(r.cost.fro2 <= 1.5 * p.perturbation.fro_norm2());
    FactorTriple c = r.compressed();
    CHECK(std::abs(oracle::residual_fro2(p.tensor, c.U, c.V, c.W) - r.cost.fro2) <= 1e-8 * p.tensor.fro_norm2());
  }
}

TEST_CASE("rank_k_als") {
  SUBCASE("consistent model") {
    std::mt19937_64 g(4);
    ReducedProblem rp;
    std::array<Matrix, 3> x0;
    for (std::size_t m = 0; m < 3; ++m) {
      rp.Y[m] = oracle::random_matrix(6, 4, g);
      x0[m] = oracle::random_matrix(4, 2, g);
    }
    rp.C = eval_factors({rp.Y[0] * x0[0], rp.Y[1] * x0[1], rp.Y[2] * x0[2]});
    AlsResult r = rank_k_als(rp, 2, 8, 300, 1);
    CHECK(std::sqrt(r.objective) <= 1e-6 * rp.C.fro_norm());
    CHECK(std::abs(reduced_objective(rp, r.X) - r.objective) <= 1e-8 * rp.C.fro_norm2());
  }
  SUBCASE("objective never increases") {
    std::mt19937_64 g(5);
    ReducedProblem rp;
    for (std::size_t m = 0; m < 3; ++m) rp.Y[m] = oracle::random_matrix(7, 4, g);
    rp.C = oracle::random_tensor({7, 7, 7}, g);
    AlsResult r = rank_k_als(rp, 3, 3, 50, 2);
    REQUIRE(r.trace.size() > 3);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1] + 1e-10);
    CHECK(std::abs(reduced_objective(rp, r.X) - r.objective) <= 1e-8 * rp.C.fro_norm2());
  }
  SUBCASE("rank-deficient bases") {
    std::mt19937_64 g(6);
    ReducedProblem rp;
    for (std::size_t m = 0; m < 3; ++m) {
      Matrix y = oracle::random_matrix(5, 3, g);
      y.col(2) = y.col(0);
      rp.Y[m] = y;
    }
    rp.C = oracle::random_tensor({5, 5, 5}, g);
    AlsResult r = rank_k_als(rp, 2, 2, 30, 3);
    CHECK(std::isfinite(r.objective));
    CHECK(r.objective <= rp.C.fro_norm2() + 1e-10);
  }
  SUBCASE("close to a dense random search at tiny size") {
    std::mt19937_64 g(7);
    ReducedProblem rp;
    for (std::size_t m = 0; m < 3; ++m) rp.Y[m] = oracle::random_matrix(3, 2, g);
    rp.C = oracle::random_tensor({3, 3, 3}, g);
    AlsResult r = rank_k_als(rp, 1, 200, 300, 4);

    // For fixed directions the best scale is closed form, so search directions only.
    std::normal_distribution<double> n(0.0, 1.0);
    double c2 = rp.C.fro_norm2(), best = c2;
    for (int it = 0; it < 1000000; ++it) {
      Vector f[3];
      for (auto& v : f) v = Vector::Zero(3);
      for (std::size_t m = 0; m < 3; ++m) {
        double x0 = n(g), x1 = n(g);
        f[m] = rp.Y[m].col(0) * x0 + rp.Y[m].col(1) * x1;
      }
      double ip = 0.0, ff = f[0].squaredNorm() * f[1].squaredNorm() * f[2].squaredNorm();
      for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j)
          for (Index l = 0; l < 3; ++l) ip += rp.C(i, j, l) * f[0](i) * f[1](j) * f[2](l);
      if (ff > 0.0) best = std::min(best, c2 - ip * ip / ff);
    }
    CHECK(r.objective <= 1.01 * best);
  }
  SUBCASE("k = 0") {
    ReducedProblem rp;
    for (std::size_t m = 0; m < 3; ++m) rp.Y[m] = Matrix::Ones(2, 2);
    rp.C = Tensor3::from_dense({2, 2, 2}, std::vector<double>(8, 1.0));
    AlsResult r = rank_k_als(rp, 0, 1, 1, 0);
    CHECK(r.objective == 8.0);
    CHECK(r.X[0].cols() == 0);
  }
}

TEST_CASE("fro_rank_k") {
  SUBCASE("exact rank recovery") {
    int ok = 0;
    for (int seed = 0; seed < 10; ++seed) {
      PlantedTensor p = planted_gaussian({30, 30, 30}, 3, 0.0, 40 + static_cast<std::uint64_t>(seed));
      AlgoParams prm;
      prm.k = 3;
      prm.trials = 1;
      prm.seed = static_cast<std::uint64_t>(seed);
      FroResult r = fro_rank_k(p.tensor, prm);
      CHECK(r.factors.rank() == 3);
      if (rel_residual(p.tensor, r.cost) <= 1e-4) ++ok;
    }
    CHECK(ok >= 8);
  }
  SUBCASE("k = 0 gives zero factors") {
    std::mt19937_64 g(9);
    Tensor3 a = oracle::random_tensor({4, 5, 6}, g);
    AlgoParams prm;
    prm.k = 0;
    FroResult r = fro_rank_k(a, prm);
    CHECK(r.factors.rank() == 0);
    CHECK(r.cost.fro2 == doctest::Approx(a.fro_norm2()).epsilon(1e-12));
  }
  SUBCASE("eps outside (0,1) is clamped") {
    AlgoParams prm;
    prm.eps = 2.0;
    CHECK(prm.resolved().eps == 0.999);
    prm.k = -1;
    CHECK_THROWS_AS(prm.resolved(), InvalidParams);
  }
  SUBCASE("same seed, same answer") {
    PlantedTensor p = planted_gaussian({15, 15, 15}, 2, 0.2, 77);
    AlgoParams prm;
    prm.k = 2;
    prm.trials = 3;
    prm.seed = 12;
    FroResult a = fro_rank_k(p.tensor, prm), b = fro_rank_k(p.tensor, prm);
    CHECK(a.cost.fro2 == b.cost.fro2);
    CHECK((a.factors.U - b.factors.U).norm() == 0.0);
  }
}

TEST_CASE("bicriteria solvers at k = 0") {
  PlantedTensor p = planted_gaussian({6, 7, 8}, 2, 0.1, 3);
  AlgoParams prm;
  prm.k = 0;
  FroResult q = bicriteria_quadratic(p.tensor, prm);
  CHECK(q.factors.rank() == 0);
  CHECK(q.factors.dims() == p.tensor.dims());
  CHECK(q.cost.fro2 == p.tensor.fro_norm2());
  CubicResult c = bicriteria_cubic(p.tensor, prm);
  CHECK(c.compressed().rank() == 0);
  CHECK(c.cost.fro2 == p.tensor.fro_norm2());
  CHECK(residual_cost(p.tensor, c.compressed()).fro2 == doctest::Approx(p.tensor.fro_norm2()));
}
