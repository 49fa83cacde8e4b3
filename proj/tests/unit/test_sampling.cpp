#include "doctest.h"
#include "oracles.hpp"
#include "tlra/sampling.hpp"

using namespace tlra;

namespace {

// Total variation between the empirical draw frequencies and the exact
// column-leverage distribution of the materialized Khatri-Rao matrix.
double kr_tv(const std::vector<Matrix>& factors, const KrLeverageSampler& s, int draws, std::uint64_t seed) {
  ImplicitKR kr{factors};
  Vector lev = oracle::leverage_by_projection(kr.materialize().transpose());
  Vector exact = lev / lev.sum();
  Vector freq = Vector::Zero(exact.size());
  Rng rng(seed);
  for (int d = 0; d < draws; ++d) freq(s.draw(rng)) += 1.0;
  freq /= draws;
  return 0.5 * (freq - exact).cwiseAbs().sum();
}

}  // namespace

TEST_CASE("leverage scores") {
  CHECK((leverage_scores(Matrix::Identity(5, 5)) - Vector::Ones(5)).norm() <= 1e-12);

  std::mt19937_64 g(1);
  Matrix q = Eigen::HouseholderQR<Matrix>(oracle::random_matrix(20, 4, g)).householderQ() * Matrix::Identity(20, 4);
  CHECK((leverage_scores(q) - q.rowwise().squaredNorm()).norm() <= 1e-12);

  Matrix m = oracle::random_matrix(50, 5, g);
  Vector s = leverage_scores(m);
  CHECK(std::abs(s.sum() - 5.0) <= 1e-8);
  CHECK(s.maxCoeff() <= 1.0 + 1e-10);
  CHECK(s.minCoeff() >= 0.0);
  CHECK((s - oracle::leverage_by_projection(m)).norm() <= 1e-8);

  Matrix def(6, 3);
  def << oracle::random_matrix(6, 2, g), Vector::Zero(6);
  CHECK(std::abs(leverage_scores(def).sum() - 2.0) <= 1e-8);
}

TEST_CASE("sample_operator") {
  Vector e1 = Vector::Zero(4);
  e1(0) = 1.0;
  SamplingOperator op = sample_operator(e1, 7, 3);
  for (Index r = 0; r < 7; ++r) {
    CHECK(op.indices[static_cast<std::size_t>(r)] == 0);
    CHECK(op.weights[static_cast<std::size_t>(r)] == doctest::Approx(1.0 / std::sqrt(7.0)));
  }
  SamplingOperator again = sample_operator(Vector::Ones(9), 100, 42);
  SamplingOperator same = sample_operator(Vector::Ones(9), 100, 42);
  CHECK(again.indices == same.indices);
  CHECK(again.weights == same.weights);
  CHECK_THROWS_AS(sample_operator(Vector::Zero(3), 2, 1), DegenerateInputError);

  SUBCASE("uniform frequencies within three standard deviations") {
    const Index n = 10, count = 100000;
    SamplingOperator u = sample_operator(Vector::Ones(n), count, 5);
    Vector freq = Vector::Zero(n);
    for (Index i : u.indices) freq(i) += 1.0;
    double mean = static_cast<double>(count) / n, sd = std::sqrt(count * (1.0 / n) * (1.0 - 1.0 / n));
    CHECK((freq.array() - mean).abs().maxCoeff() <= 3.0 * sd * 1.3);
  }
  SUBCASE("l1 weights are 1/(count q)") {
    Vector p(2);
    p << 1.0, 3.0;
    SamplingOperator l1 = sample_operator(p, 8, 9, 1.0);
    for (std::size_t r = 0; r < 8; ++r) {
      double q = l1.indices[r] == 0 ? 0.25 : 0.75;
      CHECK(l1.weights[r] == doctest::Approx(1.0 / (8 * q)));
    }
  }
  SUBCASE("selection helpers") {
    std::mt19937_64 g(2);
    Matrix m = oracle::random_matrix(9, 3, g);
    CHECK(oracle::rel_diff(again.select_rows(m), Matrix(again.matrix().transpose()) * m) <= 1e-15);
    CHECK(oracle::rel_diff(again.select_cols(Matrix(m.transpose())), m.transpose() * Matrix(again.matrix())) <= 1e-15);
  }
}

TEST_CASE("Lewis weights") {
  std::mt19937_64 g(3);
  Matrix m = oracle::random_matrix(50, 5, g);
  LewisResult two = lewis_weights(m, 2.0, 1);
  CHECK((two.weights - leverage_scores(m)).norm() <= 1e-12);
  for (double p : {1.0, 1.5, 2.0}) {
    LewisResult id = lewis_weights(Matrix::Identity(6, 6), p);
    CHECK((id.weights - Vector::Ones(6)).norm() <= 1e-12);
  }
  LewisResult one = lewis_weights(m, 1.0, 40);
  CHECK(one.residual <= 1e-6);
  CHECK(std::abs(one.weights.sum() - 5.0) <= 1e-6);

  Matrix z = m;
  z.row(3).setZero();
  CHECK(lewis_weights(z, 1.0).weights(3) == 0.0);
  CHECK_THROWS_AS(lewis_weights(m, 3.0), InvalidParams);
}

TEST_CASE("l1 Lewis sampling preserves l1 norms of a subspace") {
  std::mt19937_64 g(4);
  const Index n = 400, d = 3;
  Matrix m = oracle::random_matrix(n, d, g);
  // Heavy rows make uniform sampling fail; Lewis sampling should not.
  m.topRows(4) *= 30.0;
  Vector w = lewis_weights(m, 1.0).weights;
  const Index count = static_cast<Index>(std::ceil(20.0 * d * std::log(static_cast<double>(d))));
  SamplingOperator s = sample_operator(w, count, 17, 1.0);
  Matrix sm = s.select_rows(m);
  int ok = 0;
  for (int t = 0; t < 100; ++t) {
    Vector x = oracle::random_matrix(d, 1, g);
    double ratio = (sm * x).lpNorm<1>() / (m * x).lpNorm<1>();
    ok += ratio >= 0.5 && ratio <= 2.0;
  }
  CHECK(ok == 100);
}

TEST_CASE("Khatri-Rao leverage sampler") {
  std::mt19937_64 g(5);
  SUBCASE("rank one factorizes into per-mode squared entries") {
    Matrix a = oracle::random_matrix(1, 5, g), b = oracle::random_matrix(1, 4, g);
    KrLeverageSampler s({a, b}, 1);
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 4; ++j) {
        double expect = a(0, i) * a(0, i) / a.squaredNorm() * b(0, j) * b(0, j) / b.squaredNorm();
        CHECK(s.probability(i * 4 + j) == doctest::Approx(expect).epsilon(1e-10));
      }
  }
  SUBCASE("two factors, 6 x 6, k = 2") {
    std::vector<Matrix> f{oracle::random_matrix(2, 6, g), oracle::random_matrix(2, 6, g)};
    KrLeverageSampler s(f, 2);
    CHECK(kr_tv(f, s, 100000, 7) <= 0.05);
  }
  SUBCASE("three factors, 4 x 4 x 4, k = 2") {
    std::vector<Matrix> f{oracle::random_matrix(2, 4, g), oracle::random_matrix(2, 4, g), oracle::random_matrix(2, 4, g)};
    KrLeverageSampler s(f, 3);
    CHECK(kr_tv(f, s, 100000, 8) <= 0.05);
  }
  SUBCASE("sketched stages stay close to the exact distribution") {
    std::vector<Matrix> f{oracle::random_matrix(3, 30, g), oracle::random_matrix(3, 30, g)};
    KrSamplerOptions opts;
    opts.sketch_dim = 400;
    KrLeverageSampler s(f, 4, opts);
    CHECK(s.sketched_stages()[0]);
    ImplicitKR kr{f};
    Vector lev = oracle::leverage_by_projection(kr.materialize().transpose());
    double tv = 0.0;
    for (Index c = 0; c < 900; ++c) tv += std::abs(s.probability(c) - lev(c) / lev.sum());
    CHECK(0.5 * tv <= 0.1);
  }
  SUBCASE("procedure probabilities sum to one and weights follow them") {
    std::vector<Matrix> f{oracle::random_matrix(3, 5, g), oracle::random_matrix(3, 7, g)};
    KrLeverageSampler s(f, 9);
    double total = 0.0;
    for (Index c = 0; c < 35; ++c) total += s.probability(c);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    SamplingOperator op = kr_leverage_sample(f, 12, 9);
    CHECK(op.count() == 12);
    for (std::size_t r = 0; r < 12; ++r) {
      CHECK(op.indices[r] < 35);
      CHECK(op.weights[r] == doctest::Approx(1.0 / std::sqrt(12.0 * s.probability(op.indices[r]))));
    }
  }
  SUBCASE("rank-deficient factors") {
    Matrix a = oracle::random_matrix(3, 6, g);
    a.row(2) = a.row(0);
    Matrix b = Matrix::Ones(3, 4);
    KrLeverageSampler s({a, b}, 11);
    ImplicitKR kr{{a, b}};
    Vector lev = oracle::leverage_by_projection(kr.materialize().transpose());
    CHECK(lev.sum() == doctest::Approx(2.0).epsilon(1e-8));
    for (Index c = 0; c < 24; ++c) CHECK(s.probability(c) == doctest::Approx(lev(c) / lev.sum()).epsilon(1e-6));
  }
}
