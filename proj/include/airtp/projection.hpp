#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "airtp/cmatrix.hpp"
#include "airtp/eig.hpp"
#include "airtp/error.hpp"

namespace airtp {

// Projects x onto the capped simplex {0 <= y_i <= 1, sum y_i = d} by
// bisection on the scalar shift t in y_i = clamp(x_i - t, 0, 1). The sum
// is monotone in t, so bisection is exact up to the stated tolerance.
inline std::vector<double> project_capped_simplex(const std::vector<double>& x, double d,
                                                  double tol = 1e-12) {
  const std::size_t n = x.size();
  if (n == 0) throw DimensionError("project_capped_simplex: empty input");
  if (d <= 0.0 || d > static_cast<double>(n))
    throw DomainError("project_capped_simplex: trace target out of range");
  const auto mass = [&](double t) {
    double s = 0.0;
    for (double xi : x) s += std::clamp(xi - t, 0.0, 1.0);
    return s;
  };
  double lo = *std::min_element(x.begin(), x.end()) - 1.0;  // mass(lo) = n >= d
  double hi = *std::max_element(x.begin(), x.end());        // mass(hi) = 0 < d
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) >= d)
      lo = mid;
    else
      hi = mid;
  }
  const double t = 0.5 * (lo + hi);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = std::clamp(x[i] - t, 0.0, 1.0);
  // close the residual sum defect on the interior coordinates
  double defect = d;
  std::size_t interior = 0;
  for (double yi : y) defect -= yi;
  for (double yi : y)
    if (yi > 0.0 && yi < 1.0) ++interior;
  if (interior > 0 && std::abs(defect) > 0.0) {
    const double bump = defect / static_cast<double>(interior);
    for (double& yi : y)
      if (yi > 0.0 && yi < 1.0) yi = std::clamp(yi + bump, 0.0, 1.0);
  }
  return y;
}

// Frobenius-nearest point of the spectrahedron {0 <= Y <= I, tr(Y) = d}:
// eigendecompose and project the spectrum onto the capped simplex.
inline CMatrix project_spectrahedron(const CMatrix& m, double d) {
  if (m.rows() != m.cols()) throw DimensionError("project_spectrahedron: matrix not square");
  if (d <= 0.0 || d > static_cast<double>(m.rows()))
    throw DomainError("project_spectrahedron: trace target out of range");
  const HermEig eig = hermitian_eig(m);
  const std::vector<double> lam = project_capped_simplex(eig.values, d);
  const std::size_t n = m.rows();
  CMatrix y(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      cplx s = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        s += lam[k] * eig.vectors(i, k) * std::conj(eig.vectors(j, k));
      y(i, j) = s;
      y(j, i) = std::conj(s);
    }
    y(i, i) = y(i, i).real();
  }
  return y;
}

// Euclidean projection onto the probability simplex {y >= 0, sum y = 1}.
inline std::vector<double> project_simplex(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n == 0) throw DimensionError("project_simplex: empty input");
  std::vector<double> u(x);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cssv = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cssv += u[i];
    const double t = (cssv - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = std::max(0.0, x[i] - theta);
  // renormalize away the last-ulp drift
  double s = std::accumulate(y.begin(), y.end(), 0.0);
  if (s > 0.0) {
    for (double& yi : y) yi /= s;
  }
  return y;
}

}  // namespace airtp
