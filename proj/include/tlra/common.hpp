#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace tlra {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
// Row-major so that iterating a row visits the output slots of one input index.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input carries no usable mass (e.g. all-zero sampling probabilities).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class InvalidParams : public Error {
 public:
  using Error::Error;
};

/// Text input could not be parsed; `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// When set, every reduction runs sequentially in a fixed order and trials are
// not run on worker threads. Off by default.
void set_reproducible(bool on);
bool reproducible();

void log_warning(const std::string& msg);

/// Natural log clamped at zero, used in k·log k sample budgets.
double log_or_zero(double x);

}  // namespace tlra

#include <functional>

namespace tlra {

/// Runs body(0..n-1). Workers are used unless reproducible mode is on; each
/// index writes only its own output slot, so results do not depend on scheduling.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace tlra
