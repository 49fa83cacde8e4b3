#include "tlra/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace tlra {

namespace {

/// Splits a stream into whitespace-separated tokens, skipping comments and
/// remembering the line each token came from.
class Tokens {
 public:
  explicit Tokens(std::istream& in) : in_(in) {}

  /// Next token on the next non-empty line; false at end of input.
  bool next_line(std::istringstream& out) {
    std::string text;
    while (std::getline(in_, text)) {
      ++line_;
      auto hash = text.find('#');
      if (hash != std::string::npos) text.erase(hash);
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      out.clear();
      out.str(text);
      return true;
    }
    return false;
  }
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

void expect_end(std::istringstream& ls, std::size_t line) {
  std::string rest;
  if (ls >> rest) throw ParseError("unexpected trailing text '" + rest + "'", line);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw ParseError("cannot open " + p.string(), 0);
  return f;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write " + p.string());
  f.exceptions(std::ios::badbit | std::ios::failbit);
  return f;
}

}  // namespace

// ---------------------------------------------------------------- .tns

Tensor3 read_tns(std::istream& in) {
  Tokens tok(in);
  std::istringstream ls;
  if (!tok.next_line(ls)) throw ParseError("missing header \"n1 n2 n3 nnz\"", tok.line());
  long long n1 = 0, n2 = 0, n3 = 0, nnz = 0;
  if (!(ls >> n1 >> n2 >> n3 >> nnz)) throw ParseError("header must be \"n1 n2 n3 nnz\"", tok.line());
  expect_end(ls, tok.line());
  if (n1 < 1 || n2 < 1 || n3 < 1 || nnz < 0) throw ParseError("header dimensions must be positive", tok.line());
  Dims d{n1, n2, n3};
  if (nnz > d.size()) throw ParseError("nnz exceeds n1*n2*n3", tok.line());

  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  std::vector<std::size_t> lines;
  for (long long e = 0; e < nnz; ++e) {
    if (!tok.next_line(ls))
      throw ParseError("expected " + std::to_string(nnz) + " entries, found " + std::to_string(e), tok.line());
    long long i = 0, j = 0, l = 0;
    double v = 0.0;
    if (!(ls >> i >> j >> l >> v)) throw ParseError("entry must be \"i j l value\"", tok.line());
    expect_end(ls, tok.line());
    if (i < 1 || i > n1 || j < 1 || j > n2 || l < 1 || l > n3) throw ParseError("index out of range", tok.line());
    entries.push_back({i - 1, j - 1, l - 1, v});
    lines.push_back(tok.line());
  }
  if (tok.next_line(ls)) throw ParseError("more entries than the header's nnz", tok.line());

  // Duplicate coordinates are an error rather than silently summed.
  std::vector<std::size_t> order(entries.size());
  for (std::size_t e = 0; e < order.size(); ++e) order[e] = e;
  auto key = [&](std::size_t e) { return (entries[e].i * n2 + entries[e].j) * n3 + entries[e].l; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  for (std::size_t e = 1; e < order.size(); ++e)
    if (key(order[e]) == key(order[e - 1])) throw ParseError("duplicate entry", lines[order[e]]);
  return Tensor3::from_entries(d, std::move(entries));
}

Tensor3 read_tns(const std::filesystem::path& path) {
  std::ifstream f = open_in(path);
  return read_tns(f);
}

void write_tns(std::ostream& out, const Tensor3& t) {
  Dims d = t.dims();
  out << d.n1 << ' ' << d.n2 << ' ' << d.n3 << ' ' << t.nnz() << '\n';
  t.for_each_nonzero([&](Index i, Index j, Index l, double v) {
    out << i + 1 << ' ' << j + 1 << ' ' << l + 1 << ' ' << format_double(v) << '\n';
  });
}

void write_tns(const std::filesystem::path& path, const Tensor3& t) {
  std::ofstream f = open_out(path);
  write_tns(f, t);
}

// ---------------------------------------------------------------- matrices

Matrix read_matrix(std::istream& in) {
  Tokens tok(in);
  std::istringstream ls;
  if (!tok.next_line(ls)) throw ParseError("missing header \"rows cols\"", tok.line());
  long long rows = -1, cols = -1;
  if (!(ls >> rows >> cols)) throw ParseError("header must be \"rows cols\"", tok.line());
  expect_end(ls, tok.line());
  if (rows < 0 || cols < 0) throw ParseError("matrix dimensions must be non-negative", tok.line());
  Matrix m(rows, cols);
  long long filled = 0, total = rows * cols;
  while (filled < total && tok.next_line(ls)) {
    std::string word;
    while (ls >> word) {
      if (filled == total) throw ParseError("more values than rows*cols", tok.line());
      try {
        std::size_t used = 0;
        double v = std::stod(word, &used);
        if (used != word.size()) throw std::invalid_argument(word);
        m(filled / cols, filled % cols) = v;
      } catch (const std::exception&) {
        throw ParseError("not a number: '" + word + "'", tok.line());
      }
      ++filled;
    }
  }
  if (filled < total)
    throw ParseError("expected " + std::to_string(total) + " values, found " + std::to_string(filled), tok.line());
  if (tok.next_line(ls)) throw ParseError("more values than rows*cols", tok.line());
  return m;
}

Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream f = open_in(path);
  return read_matrix(f);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_double(m(r, c));
    out << '\n';
  }
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream f = open_out(path);
  write_matrix(f, m);
}

void write_factors(const std::filesystem::path& dir, const FactorTriple& f) {
  std::filesystem::create_directories(dir);
  write_matrix(dir / "U.txt", f.U);
  write_matrix(dir / "V.txt", f.V);
  write_matrix(dir / "W.txt", f.W);
}

FactorTriple read_factors(const std::filesystem::path& dir) {
  FactorTriple f{read_matrix(dir / "U.txt"), read_matrix(dir / "V.txt"), read_matrix(dir / "W.txt")};
  if (f.V.cols() != f.U.cols() || f.W.cols() != f.U.cols()) throw ParseError("factor files disagree on rank", 0);
  return f;
}

// ---------------------------------------------------------------- meta.json

nlohmann::json RunMeta::to_json() const {
  nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
  j["algo"] = algo;
  j["k"] = k;
  j["eps"] = eps;
  j["rank"] = rank;
  j["cost_fro2"] = cost_fro2;
  j["cost_l1"] = cost_l1;
  j["seed"] = seed;
  j["elapsed_ms"] = elapsed_ms;
  return j;
}

RunMeta RunMeta::from_json(const nlohmann::json& j) {
  RunMeta m;
  try {
    m.algo = j.at("algo").get<std::string>();
    m.k = j.at("k").get<Index>();
    m.eps = j.at("eps").get<double>();
    m.rank = j.at("rank").get<Index>();
    m.cost_fro2 = j.at("cost_fro2").get<double>();
    m.cost_l1 = j.at("cost_l1").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.elapsed_ms = j.at("elapsed_ms").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("meta.json: ") + e.what(), 0);
  }
  static const char* fixed[] = {"algo", "k", "eps", "rank", "cost_fro2", "cost_l1", "seed", "elapsed_ms"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(std::begin(fixed), std::end(fixed), it.key()) == std::end(fixed)) m.extra[it.key()] = it.value();
  return m;
}

void write_meta(const std::filesystem::path& path, const RunMeta& meta) {
  std::ofstream f = open_out(path);
  f << meta.to_json().dump(2) << '\n';
}

RunMeta read_meta(const std::filesystem::path& path) {
  std::ifstream f = open_in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("meta.json: ") + e.what(), 0);
  }
  return RunMeta::from_json(j);
}

}  // namespace tlra
