#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "airtp/cmatrix.hpp"
#include "airtp/error.hpp"

namespace airtp {

// Full eigensystem of a Hermitian matrix. Eigenvalues ascending,
// eigenvector k in column k of `vectors`.
struct HermEig {
  std::vector<double> values;
  CMatrix vectors;
};

namespace detail {

inline double pythag(double a, double b) {
  const double aa = std::abs(a), ab = std::abs(b);
  if (aa > ab) {
    const double r = ab / aa;
    return aa * std::sqrt(1.0 + r * r);
  }
  if (ab == 0.0) return 0.0;
  const double r = aa / ab;
  return ab * std::sqrt(1.0 + r * r);
}

// Closed form for the 2x2 Hermitian case; the pair of eigenvectors is
// orthonormal by construction.
inline HermEig eig2x2(const CMatrix& a) {
  const double p = a(0, 0).real();
  const double q = a(1, 1).real();
  const cplx b = a(0, 1);
  const double half_diff = 0.5 * (p - q);
  const double rad = std::sqrt(half_diff * half_diff + std::norm(b));
  const double mid = 0.5 * (p + q);
  HermEig out;
  out.values = {mid - rad, mid + rad};
  out.vectors = CMatrix(2, 2);
  if (rad == 0.0 || std::abs(b) == 0.0) {
    // already diagonal; order columns by diagonal value
    if (p <= q) {
      out.values = {p, q};
      out.vectors(0, 0) = 1.0;
      out.vectors(1, 1) = 1.0;
    } else {
      out.values = {q, p};
      out.vectors(1, 0) = 1.0;
      out.vectors(0, 1) = 1.0;
    }
    return out;
  }
  // eigenvector for the larger eigenvalue: (b, lambda - p)^T, with the
  // numerically safer of the two equivalent forms
  const double lam_hi = mid + rad;
  cplx v0, v1;
  if (std::abs(lam_hi - p) > std::abs(lam_hi - q)) {
    v0 = b;
    v1 = lam_hi - p;
  } else {
    v0 = lam_hi - q;
    v1 = std::conj(b);
  }
  const double nrm = std::sqrt(std::norm(v0) + std::norm(v1));
  v0 /= nrm;
  v1 /= nrm;
  // column 0 (smaller eigenvalue) is the orthogonal complement
  out.vectors(0, 0) = -std::conj(v1);
  out.vectors(1, 0) = std::conj(v0);
  out.vectors(0, 1) = v0;
  out.vectors(1, 1) = v1;
  return out;
}

}  // namespace detail

// Dense Hermitian eigendecomposition: Householder reduction to a real
// symmetric tridiagonal form followed by implicit QL with shifts.
// The input is symmetrized internally, so entries may be off-Hermitian
// by roundoff-scale amounts.
inline HermEig hermitian_eig(const CMatrix& m) {
  if (m.rows() != m.cols())
    throw DimensionError("hermitian_eig: matrix is not square (" + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()) + ")");
  const std::size_t n = m.rows();
  if (n == 0) throw DimensionError("hermitian_eig: empty matrix");
  if (n == 1) {
    HermEig out;
    out.values = {m(0, 0).real()};
    out.vectors = CMatrix::identity(1);
    return out;
  }
  CMatrix a = hermitize(m);
  if (!a.all_finite()) throw DomainError("hermitian_eig: non-finite entries");
  if (n == 2) return detail::eig2x2(a);

  CMatrix q = CMatrix::identity(n);
  std::vector<cplx> v(n), p(n), t(n);

  // Householder reduction: zero column k below the first subdiagonal.
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double colnorm_sq = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) colnorm_sq += std::norm(a(i, k));
    const double colnorm = std::sqrt(colnorm_sq);
    if (colnorm < 1e-300) continue;

    const cplx lead = a(k + 1, k);
    const cplx phase = (std::abs(lead) > 0.0) ? lead / std::abs(lead) : cplx{1.0, 0.0};
    const cplx beta = -phase * colnorm;

    std::fill(v.begin(), v.end(), cplx{0.0, 0.0});
    for (std::size_t i = k + 1; i < n; ++i) v[i] = a(i, k);
    v[k + 1] -= beta;
    double vnorm_sq = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) vnorm_sq += std::norm(v[i]);
    if (vnorm_sq < 1e-300) continue;
    const double inv_vnorm = 1.0 / std::sqrt(vnorm_sq);
    for (std::size_t i = k + 1; i < n; ++i) v[i] *= inv_vnorm;

    // p = A v, kappa = v^H p (real for Hermitian A)
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * v[j];
      p[i] = s;
    }
    double kappa = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) kappa += std::real(std::conj(v[i]) * p[i]);

    // A <- (I - 2vv^H) A (I - 2vv^H)
    for (std::size_t i = 0; i < n; ++i) {
      const cplx vi = v[i];
      const cplx pi = p[i];
      for (std::size_t j = 0; j < n; ++j) {
        a(i, j) += -2.0 * vi * std::conj(p[j]) - 2.0 * pi * std::conj(v[j]) +
                   4.0 * kappa * vi * std::conj(v[j]);
      }
    }
    // Q <- Q (I - 2 v v^H)
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) s += q(i, j) * v[j];
      t[i] = s;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j) q(i, j) -= 2.0 * t[i] * std::conj(v[j]);
  }

  // Rotate the complex subdiagonal onto the real axis: T_real = D^H T D.
  std::vector<double> d(n), e(n, 0.0);
  std::vector<cplx> ph(n, cplx{1.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i).real();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const cplx sub = a(i + 1, i);
    const double mag = std::abs(sub);
    e[i] = mag;
    ph[i + 1] = (mag > 0.0) ? ph[i] * (sub / mag) : ph[i];
  }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) q(i, j) *= ph[j];

  // Implicit QL with shifts on (d, e); rotations applied to Q's columns.
  // e is used with the convention e[i] = T(i+1, i), e[n-1] unused.
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t mdx;
    do {
      for (mdx = l; mdx + 1 < n; ++mdx) {
        const double dd = std::abs(d[mdx]) + std::abs(d[mdx + 1]);
        if (std::abs(e[mdx]) <= 1e-17 * dd + 1e-300) break;
      }
      if (mdx != l) {
        if (iter++ == 80)
          throw DomainError("hermitian_eig: QL iteration failed to converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = detail::pythag(g, 1.0);
        g = d[mdx] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, pp = 0.0;
        bool underflow = false;
        for (std::size_t i1 = mdx; i1-- > l;) {
          double f = s * e[i1];
          const double b = c * e[i1];
          r = detail::pythag(f, g);
          e[i1 + 1] = r;
          if (r == 0.0) {
            d[i1 + 1] -= pp;
            e[mdx] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i1 + 1] - pp;
          r = (d[i1] - g) * s + 2.0 * c * b;
          pp = s * r;
          d[i1 + 1] = g + pp;
          g = c * r - b;
          for (std::size_t k = 0; k < n; ++k) {
            const cplx f2 = q(k, i1 + 1);
            q(k, i1 + 1) = s * q(k, i1) + c * f2;
            q(k, i1) = c * q(k, i1) - s * f2;
          }
        }
        if (underflow) continue;
        d[l] -= pp;
        e[l] = g;
        e[mdx] = 0.0;
      }
    } while (mdx != l);
  }

  // Sort ascending, permuting eigenvector columns alongside.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });

  HermEig out;
  out.values.resize(n);
  out.vectors = CMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = d[order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = q(i, order[j]);
  }
  if (!out.vectors.all_finite())
    throw DomainError("hermitian_eig: non-finite eigenvectors");
  return out;
}

// Smallest eigenvalue and a unit-norm eigenvector for it.
inline std::pair<double, CMatrix> min_eigpair(const CMatrix& m) {
  const HermEig eig = hermitian_eig(m);
  return {eig.values.front(), eig.vectors.col(0)};
}

}  // namespace airtp
