#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "tlra/tensor.hpp"

namespace tlra {

// .tns: header "n1 n2 n3 nnz", then nnz lines "i j l value" with 1-based
// indices. `#` starts a comment anywhere on a line; blank lines are ignored.
// Malformed input throws ParseError carrying the line number.
Tensor3 read_tns(std::istream& in);
Tensor3 read_tns(const std::filesystem::path& path);
void write_tns(std::ostream& out, const Tensor3& t);
void write_tns(const std::filesystem::path& path, const Tensor3& t);

// Matrix text: header "rows cols", then rows*cols values in row-major order.
Matrix read_matrix(std::istream& in);
Matrix read_matrix(const std::filesystem::path& path);
void write_matrix(std::ostream& out, const Matrix& m);
void write_matrix(const std::filesystem::path& path, const Matrix& m);

/// Writes U.txt, V.txt and W.txt into `dir`, creating it if needed.
void write_factors(const std::filesystem::path& dir, const FactorTriple& f);
FactorTriple read_factors(const std::filesystem::path& dir);

/// Contents of meta.json. `extra` holds command-specific fields (sample
/// counts, ledgers) and is merged into the top-level object.
struct RunMeta {
  std::string algo;
  Index k = 0;
  double eps = 0.0;
  Index rank = 0;
  double cost_fro2 = 0.0;
  double cost_l1 = 0.0;
  std::uint64_t seed = 0;
  double elapsed_ms = 0.0;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  static RunMeta from_json(const nlohmann::json& j);
};

void write_meta(const std::filesystem::path& path, const RunMeta& meta);
RunMeta read_meta(const std::filesystem::path& path);

}  // namespace tlra
