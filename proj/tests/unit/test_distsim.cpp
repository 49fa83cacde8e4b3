#include <json.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "tlra/distsim.hpp"
#include "tlra/planted.hpp"

using namespace tlra;

namespace {

double factor_diff(const FactorTriple& a, const FactorTriple& b) {
  return std::max({oracle::rel_diff(a.U, b.U), oracle::rel_diff(a.V, b.V), oracle::rel_diff(a.W, b.W)});
}

AlgoParams config(Index k, Index t) {
  AlgoParams p;
  p.k = k;
  p.t = t;
  p.trials = 1;
  p.seed = 17;
  return p;
}

// Message sizes written out by hand for cubic dims n, widths s and t, rank k.
std::size_t hand_count(std::size_t machines, std::size_t n, std::size_t s, std::size_t t, std::size_t k,
                       std::size_t seed_words, bool upload) {
  std::size_t per = seed_words + 3 * t * s + t * t * t + 3 * s * k + (upload ? 3 * k * n : 0);
  return machines * per;
}

}  // namespace

TEST_CASE("one machine reproduces the centralized pipeline") {
  PlantedTensor pt = planted_gaussian({16, 16, 16}, 2, 0.1, 3);
  AlgoParams p = config(2, 10);
  DistResult d = distsim_run({pt.tensor}, p, p.seed);
  CHECK(factor_diff(d.factors, fro_rank_k(pt.tensor, p).factors) <= 1e-12);

  AlgoParams r = p.resolved();
  auto s = static_cast<std::size_t>(r.s);
  CHECK(d.ledger.total() == hand_count(1, 16, s, 10, 2, 2 * 2 + 2 + 4, true));
  CHECK(d.ledger.total() == protocol_words(pt.tensor.dims(), r, 1));
  auto phases = d.ledger.by_phase();
  CHECK(phases["seeds"] == 10);
  CHECK(phases["sketch_upload"] == 3 * 10 * s + 1000);
  CHECK(phases["solution"] == 3 * s * 2);
  CHECK(phases["factor_upload"] == 3 * 2 * 16);
}

TEST_CASE("partitions of one tensor give the centralized output") {
  PlantedTensor pt = planted_gaussian({18, 18, 18}, 3, 0.1, 5);
  AlgoParams p = config(3, 12);
  FactorTriple central = fro_rank_k(pt.tensor, p).factors;
  for (int s : {1, 3, 5}) {
    CAPTURE(s);
    for (bool split : {false, true}) {
      std::vector<Tensor3> parts = random_partition(pt.tensor, s, 40 + static_cast<std::uint64_t>(s), split);
      DistResult d = distsim_run(parts, p, p.seed);
      CHECK(factor_diff(d.factors, central) <= 1e-9);
      CHECK(d.ledger.total() == protocol_words(pt.tensor.dims(), p.resolved(), s));
      for (int m = 0; m < s; ++m) CHECK(d.ledger.link(m, true) + d.ledger.link(m, false) == d.ledger.total() / static_cast<std::size_t>(s));
    }
  }
}

TEST_CASE("bicriteria mode uploads V shares") {
  PlantedTensor pt = planted_gaussian({12, 12, 12}, 2, 0.0, 8);
  AlgoParams p = config(2, 0);  // identity reductions
  DistOptions o;
  o.mode = StreamMode::bicriteria;
  DistResult d = distsim_run(random_partition(pt.tensor, 3, 2), p, p.seed, o);
  CHECK(factor_diff(d.factors, bicriteria_cubic(pt.tensor, p).compressed()) <= 1e-9);
  CHECK(residual_cost(pt.tensor, d.factors).fro2 <= 1e-12 * pt.tensor.fro_norm2());
  CHECK(d.ledger.total() == protocol_words(pt.tensor.dims(), p.resolved(), 3, o));
  CHECK(d.ledger.by_phase()["solution"] == 0);
}

TEST_CASE("skipping the upload leaves only the polynomial part") {
  PlantedTensor pt = planted_gaussian({14, 14, 14}, 2, 0.1, 9);
  AlgoParams p = config(2, 9);
  DistOptions o;
  o.skip_upload = true;
  DistResult d = distsim_run(random_partition(pt.tensor, 4, 1), p, p.seed, o);
  CHECK(d.factors.rank() == 0);
  auto s = static_cast<std::size_t>(p.resolved().s);
  CHECK(d.ledger.total() == hand_count(4, 14, s, 9, 2, 10, false));
  CHECK(d.ledger.by_phase().count("factor_upload") == 0);
}

TEST_CASE("ledger totals stay within the stated budget") {
  PlantedTensor pt = planted_gaussian({30, 30, 30}, 2, 0.1, 10);
  AlgoParams p = config(2, 12);
  AlgoParams r = p.resolved();
  const std::size_t k = 2, n = 30, t = 12, sd = static_cast<std::size_t>(r.s);
  const std::size_t poly = 3 * t * sd + t * t * t + 3 * sd * k;
  for (int s : {1, 3, 5}) {
    DistResult d = distsim_run(random_partition(pt.tensor, s, 3), p, p.seed);
    CHECK(d.ledger.total() <= static_cast<std::size_t>(s) * (poly + seed_message_words(r) + 3 * k * n));
    CHECK(d.ledger.total() == static_cast<std::size_t>(s) * (poly + seed_message_words(r) + 3 * k * n));
  }
}

TEST_CASE("ledger JSON") {
  PlantedTensor pt = planted_gaussian({8, 8, 8}, 1, 0.1, 1);
  DistResult d = distsim_run(random_partition(pt.tensor, 2, 1), config(1, 5), 3);
  nlohmann::json j = nlohmann::json::parse(d.ledger.to_json());
  CHECK(j["word_bits"] == 64);
  CHECK(j["total_words"].get<std::size_t>() == d.ledger.total());
  CHECK(j["links"].size() == 2);
  std::size_t sum = 0;
  for (const auto& m : j["messages"]) sum += m["words"].get<std::size_t>();
  CHECK(sum == d.ledger.total());
}

TEST_CASE("distsim errors") {
  AlgoParams p = config(1, 0);
  CHECK_THROWS_AS(distsim_run({}, p, 1), InvalidParams);
  CHECK_THROWS_AS(distsim_run({Tensor3::zeros({3, 3, 3}), Tensor3::zeros({3, 3, 4})}, p, 1), ShapeError);
  Machine m(Tensor3::zeros({3, 3, 3}), p.resolved());
  CHECK_THROWS_AS(m.handle(Message::data("solution", {})), InvalidParams);

  AlgoParams k0 = config(0, 0);
  DistResult z = distsim_run({Tensor3::zeros({4, 4, 4})}, k0, 1);
  CHECK(z.factors.rank() == 0);
}

TEST_CASE("exact low-rank input: near-zero ALS ties resolve the same way for every partition") {
  PlantedTensor pt = planted_gaussian({20, 20, 20}, 3, 0.0, 1);
  AlgoParams p = config(3, 10);
  DistResult one = distsim_run({pt.tensor}, p, p.seed);
  for (std::uint64_t s = 0; s < 5; ++s) {
    DistResult many = distsim_run(random_partition(pt.tensor, 3, s), p, p.seed);
    CHECK(factor_diff(many.factors, one.factors) <= 1e-9);
  }
}
