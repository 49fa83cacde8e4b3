#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <vector>

#include "tlra/fro_lra.hpp"

namespace tlra {

/// One turnstile update A(i,j,l) += delta, 0-based indices.
struct Update {
  Index i = 0, j = 0, l = 0;
  double delta = 0.0;
};

/// Reads "i j l delta" lines (1-based, `#` starts a comment) one at a time.
/// Each line is handed out exactly once; there is no rewind.
class UpdateReader {
 public:
  explicit UpdateReader(std::istream& in) : in_(in) {}
  /// False at end of input. Throws ParseError on a malformed line.
  bool next(Update& out);
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

enum class StreamMode { bicriteria, rank_k };

struct StreamResult {
  FactorTriple factors;
  /// Set in bicriteria mode: alpha(V1, V2, V3).
  std::optional<TuckerForm> tucker;
  ReducedProblem reduced;
};

/// Sketch state of a turnstile stream. Sketch entries are regenerated from
/// seeds on every update; only V_i (n_i x s) and C (t1 x t2 x t3) are stored.
/// Shares its sketches with trial 0 of the offline pipeline for the same root seed.
class StreamState {
 public:
  StreamState(Dims dims, const AlgoParams& params, std::uint64_t seed);
  StreamState(Index n, const AlgoParams& params, std::uint64_t seed) : StreamState(Dims{n, n, n}, params, seed) {}

  /// Throws ShapeError when an index is out of range.
  void update(Index i, Index j, Index l, double delta);
  void update(const Update& u) { update(u.i, u.j, u.l, u.delta); }
  /// Drains the reader; returns the number of updates applied.
  std::size_t consume(UpdateReader& reader);
  /// Drains a range of updates.
  template <class It>
  std::size_t consume(It first, It last) {
    std::size_t n = 0;
    for (; first != last; ++first, ++n) update(*first);
    return n;
  }

  StreamResult finalize(StreamMode mode = StreamMode::bicriteria) const;

  Dims dims() const { return dims_; }
  const AlgoParams& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }
  const std::array<Matrix, 3>& V() const { return v_; }
  const Tensor3& C() const { return c_; }
  std::size_t updates() const { return updates_; }
  const PipelineSketches& sketches() const { return specs_; }

  /// Words held by the state: sum n_i s + t1 t2 t3 accumulator words plus seed words.
  std::size_t space_words() const;
  /// Words needed to regenerate every sketch: hash and sign coefficients plus one value seed each.
  std::size_t seed_words() const;

 private:
  Dims dims_;
  AlgoParams params_;
  std::uint64_t seed_;
  PipelineSketches specs_;
  std::vector<SketchOp> s_;  // lazy: nothing stored beyond seeds
  std::vector<SketchOp> t_;
  std::array<Matrix, 3> v_;
  Tensor3 c_;
  std::size_t updates_ = 0;
};

}  // namespace tlra
