#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "airtp/error.hpp"
#include "airtp/rng.hpp"

namespace airtp {

using cplx = std::complex<double>;

// Dense complex matrix, row-major, value semantics. Dimensions in this
// library stay at or below 64x64, so everything is plain O(n^3) with no
// blocking or views.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, cplx{0.0, 0.0}) {}

  static CMatrix identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  // Column vector from a list of entries.
  static CMatrix col_vector(std::initializer_list<cplx> entries) {
    CMatrix v(entries.size(), 1);
    std::size_t i = 0;
    for (const cplx& e : entries) v(i++, 0) = e;
    return v;
  }

  static CMatrix diag(std::initializer_list<double> entries) {
    CMatrix m(entries.size(), entries.size());
    std::size_t i = 0;
    for (double e : entries) {
      m(i, i) = e;
      ++i;
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  cplx& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  // Flat access for vector-shaped matrices.
  cplx& operator[](std::size_t i) { return data_[i]; }
  const cplx& operator[](std::size_t i) const { return data_[i]; }

  const cplx* data() const { return data_.data(); }
  cplx* data() { return data_.data(); }

  CMatrix adjoint() const {
    CMatrix r(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) r(j, i) = std::conj((*this)(i, j));
    return r;
  }

  CMatrix transpose() const {
    CMatrix r(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
    return r;
  }

  CMatrix col(std::size_t j) const {
    CMatrix v(rows_, 1);
    for (std::size_t i = 0; i < rows_; ++i) v(i, 0) = (*this)(i, j);
    return v;
  }

  void set_col(std::size_t j, const CMatrix& v) {
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v(i, 0);
  }

  cplx trace() const {
    cplx t = 0.0;
    for (std::size_t i = 0; i < rows_ && i < cols_; ++i) t += (*this)(i, i);
    return t;
  }

  double norm_fro() const {
    double s = 0.0;
    for (const cplx& v : data_) s += std::norm(v);
    return std::sqrt(s);
  }

  CMatrix& operator+=(const CMatrix& o) {
    require_same_shape(o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  CMatrix& operator-=(const CMatrix& o) {
    require_same_shape(o, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  CMatrix& operator*=(cplx s) {
    for (cplx& v : data_) v *= s;
    return *this;
  }

  friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
  friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
  friend CMatrix operator*(CMatrix a, cplx s) { return a *= s; }
  friend CMatrix operator*(cplx s, CMatrix a) { return a *= s; }

  friend CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    if (a.cols_ != b.rows_)
      throw DimensionError("matmul: inner dimensions disagree (" + std::to_string(a.cols_) +
                           " vs " + std::to_string(b.rows_) + ")");
    CMatrix r(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const cplx aik = a(i, k);
        if (aik == cplx{0.0, 0.0}) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) r(i, j) += aik * b(k, j);
      }
    }
    return r;
  }

  bool all_finite() const {
    for (const cplx& v : data_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }

 private:
  void require_same_shape(const CMatrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw DimensionError(std::string(op) + ": shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

// a^H b for column vectors.
inline cplx vdot(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != 1 || b.cols() != 1 || a.rows() != b.rows())
    throw DimensionError("vdot: expects column vectors of equal length");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += std::conj(a(i, 0)) * b(i, 0);
  return s;
}

inline double norm2_sq(const CMatrix& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += std::norm(v[i]);
  return s;
}

// v v^H.
inline CMatrix outer(const CMatrix& v) {
  CMatrix r(v.rows(), v.rows());
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = 0; j < v.rows(); ++j) r(i, j) = v(i, 0) * std::conj(v(j, 0));
  return r;
}

// (M + M^H) / 2.
inline CMatrix hermitize(const CMatrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("hermitize: matrix is not square");
  CMatrix r(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      r(i, j) = 0.5 * (m(i, j) + std::conj(m(j, i)));
  return r;
}

// Re tr(A^H B), the Frobenius inner product.
inline double fro_inner(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("fro_inner: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      s += std::real(std::conj(a(i, j)) * b(i, j));
  return s;
}

// Entries i.i.d. complex Gaussian, mean + CN(0, variance).
inline CMatrix sample_complex_gaussian(cplx mean, double variance, std::size_t rows,
                                       std::size_t cols, Rng& rng) {
  if (variance < 0.0) throw DomainError("sample_complex_gaussian: negative variance");
  CMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.complex_normal(mean, variance);
  return m;
}

}  // namespace airtp
