#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "airtp/error.hpp"
#include "airtp/rng.hpp"

namespace airtp {

// Dense real matrix, row-major. Used by the toy transformer; the
// complex-valued signal processing lives in CMatrix.
class RMatrix {
 public:
  RMatrix() = default;
  RMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  RMatrix& operator+=(const RMatrix& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  RMatrix& operator-=(const RMatrix& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  RMatrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }
  friend RMatrix operator+(RMatrix a, const RMatrix& b) { return a += b; }
  friend RMatrix operator-(RMatrix a, const RMatrix& b) { return a -= b; }

  double max_abs_diff(const RMatrix& o) const {
    require_same_shape(o);
    double m = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i)
      m = std::max(m, std::abs(data_[i] - o.data_[i]));
    return m;
  }

  double norm_fro() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  // Column slice [c0, c1).
  RMatrix cols_block(std::size_t c0, std::size_t c1) const {
    RMatrix r(rows_, c1 - c0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = c0; j < c1; ++j) r(i, j - c0) = (*this)(i, j);
    return r;
  }

  // Row slice [r0, r1).
  RMatrix rows_block(std::size_t r0, std::size_t r1) const {
    RMatrix r(r1 - r0, cols_);
    for (std::size_t i = r0; i < r1; ++i)
      for (std::size_t j = 0; j < cols_; ++j) r(i - r0, j) = (*this)(i, j);
    return r;
  }

 private:
  void require_same_shape(const RMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw DimensionError("RMatrix: shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A * B, with optional transposes. ikj loop order keeps the inner
// stride unit-length.
inline RMatrix matmul(const RMatrix& a, const RMatrix& b, bool trans_a = false,
                      bool trans_b = false) {
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t kk = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  if (kk != kb) throw DimensionError("matmul: inner dimensions disagree");
  RMatrix c(m, n);
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < kk; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        const double* brow = b.row(k);
        double* crow = c.row(i);
        for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
      }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double* arow = a.row(i);
        const double* brow = b.row(j);
        double s = 0.0;
        for (std::size_t k = 0; k < kk; ++k) s += arow[k] * brow[k];
        c(i, j) = s;
      }
  } else if (trans_a && !trans_b) {
    for (std::size_t k = 0; k < kk; ++k) {
      const double* arow = a.row(k);
      const double* brow = b.row(k);
      for (std::size_t i = 0; i < m; ++i) {
        const double aki = arow[i];
        if (aki == 0.0) continue;
        double* crow = c.row(i);
        for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < kk; ++k) s += a(k, i) * b(j, k);
        c(i, j) = s;
      }
  }
  return c;
}

inline RMatrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  RMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = stddev * rng.normal();
  return m;
}

}  // namespace airtp
