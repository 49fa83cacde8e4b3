#include "tlra/linalg.hpp"

#include <algorithm>
#include <limits>

namespace tlra {

namespace {

using Svd = Eigen::BDCSVD<Matrix>;

Svd thin_svd(const Matrix& m) { return Svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV); }

}  // namespace

double rank_cutoff(const Vector& s, Index rows, Index cols) {
  double smax = s.size() ? s.maxCoeff() : 0.0;
  return smax * static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
}

Matrix pinv(const Matrix& m) {
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  Svd svd = thin_svd(m);
  const Vector& s = svd.singularValues();
  double cut = rank_cutoff(s, m.rows(), m.cols());
  Vector inv = Vector::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Index numerical_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Svd svd(m);
  const Vector& s = svd.singularValues();
  double cut = rank_cutoff(s, m.rows(), m.cols());
  return static_cast<Index>((s.array() > cut).count());
}

Matrix orthonormal_basis(const Matrix& m) {
  if (m.size() == 0) return Matrix::Zero(m.rows(), 0);
  Svd svd = thin_svd(m);
  const Vector& s = svd.singularValues();
  double cut = rank_cutoff(s, m.rows(), m.cols());
  Index r = static_cast<Index>((s.array() > cut).count());
  return svd.matrixU().leftCols(r);
}

Matrix lstsq(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("lstsq: row counts differ");
  return pinv(a) * b;
}

Matrix truncated_svd(const Matrix& m, Index k) {
  if (k <= 0 || m.size() == 0) return Matrix::Zero(m.rows(), m.cols());
  Svd svd = thin_svd(m);
  Index r = std::min<Index>(k, svd.singularValues().size());
  return svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
         svd.matrixV().leftCols(r).transpose();
}

Matrix top_left_singular(const Matrix& m, Index k) {
  if (m.size() == 0) return Matrix::Zero(m.rows(), 0);
  Svd svd = thin_svd(m);
  Index r = std::min<Index>(std::max<Index>(k, 0), svd.matrixU().cols());
  return svd.matrixU().leftCols(r);
}

}  // namespace tlra
