#include "tlra/streaming.hpp"

#include <sstream>
#include <string>

namespace tlra {

bool UpdateReader::next(Update& out) {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    auto hash = text.find('#');
    if (hash != std::string::npos) text.erase(hash);
    std::istringstream ls(text);
    long long i = 0, j = 0, l = 0;
    double d = 0.0;
    if (!(ls >> i)) {
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ParseError("expected \"i j l delta\"", line_);
    }
    if (!(ls >> j >> l >> d)) throw ParseError("expected \"i j l delta\"", line_);
    std::string rest;
    if (ls >> rest) throw ParseError("trailing text after update", line_);
    if (i < 1 || j < 1 || l < 1) throw ParseError("indices are 1-based", line_);
    out = {static_cast<Index>(i - 1), static_cast<Index>(j - 1), static_cast<Index>(l - 1), d};
    return true;
  }
  return false;
}

StreamState::StreamState(Dims dims, const AlgoParams& params, std::uint64_t seed)
    : dims_(dims), params_(params.resolved()), seed_(seed) {
  if (dims.n1 < 1 || dims.n2 < 1 || dims.n3 < 1) throw InvalidParams("stream dimensions must be >= 1");
  params_.seed = seed;
  specs_ = make_pipeline_sketches(dims, params_, trial_seed(seed, 0));
  for (std::size_t m = 0; m < 3; ++m) {
    s_.emplace_back(specs_.S[m], false);
    t_.emplace_back(specs_.T[m], false);
    v_[m] = Matrix::Zero(dims[static_cast<int>(m) + 1], specs_.S[m].output_dim);
  }
  c_ = Tensor3::zeros({specs_.T[0].output_dim, specs_.T[1].output_dim, specs_.T[2].output_dim});
}

void StreamState::update(Index i, Index j, Index l, double delta) {
  if (i < 0 || i >= dims_.n1 || j < 0 || j >= dims_.n2 || l < 0 || l >= dims_.n3)
    throw ShapeError("stream update index out of range");
  // Flattening columns: mode 1 (j,l), mode 2 (l,i), mode 3 (i,j).
  const std::array<Index, 3> row{i, j, l};
  const std::array<Index, 3> col{j * dims_.n3 + l, l * dims_.n1 + i, i * dims_.n2 + j};
  for (std::size_t m = 0; m < 3; ++m) {
    Matrix& v = v_[m];
    for (Index r = 0; r < v.cols(); ++r) v(row[m], r) += delta * s_[m].entry(r, col[m]);
  }
  c_.at(t_[0].bucket(i), t_[1].bucket(j), t_[2].bucket(l)) += delta * t_[0].weight(i) * t_[1].weight(j) * t_[2].weight(l);
  ++updates_;
}

std::size_t StreamState::consume(UpdateReader& reader) {
  std::size_t n = 0;
  Update u;
  while (reader.next(u)) {
    try {
      update(u);
    } catch (const ShapeError& e) {
      throw ParseError(e.what(), reader.line());
    }
    ++n;
  }
  return n;
}

StreamResult StreamState::finalize(StreamMode mode) const {
  StreamResult out;
  for (std::size_t m = 0; m < 3; ++m) {
    const SketchOp& t = t_[m];
    Matrix y = Matrix::Zero(t.output_dim(), v_[m].cols());
    for (Index r = 0; r < v_[m].rows(); ++r) y.row(t.bucket(r)) += t.weight(r) * v_[m].row(r);
    out.reduced.Y[m] = std::move(y);
  }
  out.reduced.C = c_;
  if (mode == StreamMode::bicriteria) {
    out.tucker = cubic_from_reduced(v_, out.reduced);
    out.factors = out.tucker->compress();
  } else if (params_.k == 0) {
    out.factors = FactorTriple::zeros(dims_, 0);
  } else {
    AlsResult als = rank_k_for_trial(out.reduced, params_, trial_seed(seed_, 0));
    out.factors = expand_rank_k(v_, als.X);
  }
  return out;
}

std::size_t StreamState::seed_words() const {
  std::size_t w = 0;
  for (std::size_t m = 0; m < 3; ++m) {
    w += static_cast<std::size_t>(specs_.S[m].hash_independence + specs_.S[m].sign_independence) + 1;
    if (specs_.T[m].kind != SketchKind::identity)
      w += static_cast<std::size_t>(specs_.T[m].hash_independence + specs_.T[m].sign_independence);
  }
  return w;
}

std::size_t StreamState::space_words() const {
  std::size_t w = static_cast<std::size_t>(c_.dims().size());
  for (const Matrix& v : v_) w += static_cast<std::size_t>(v.size());
  return w + seed_words();
}

}  // namespace tlra
