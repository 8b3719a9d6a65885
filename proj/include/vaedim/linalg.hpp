#pragma once
// Small dense helpers: cyclic Jacobi eigensolver for symmetric matrices and a
// Gauss-Jordan inverse. Fine for the k <= 64 matrices that appear here.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "vaedim/tensor.hpp"

namespace vaedim {

// Eigenvalues of a symmetric k x k matrix, ascending. If vectors is non-null
// it receives the orthonormal eigenvectors as columns (same order).
inline std::vector<double> sym_eig(const Tensor& a, Tensor* vectors = nullptr) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1))
    throw std::invalid_argument("sym_eig: need square matrix, got " +
                                shape_str(a.shape()));
  const std::size_t k = a.dim(0);
  Tensor m = a;
  Tensor v({k, k});
  for (std::size_t i = 0; i < k; ++i) v.at(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = p + 1; q < k; ++q) off += m.at(p, q) * m.at(p, q);
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        const double apq = m.at(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < k; ++i) {
          const double mip = m.at(i, p), miq = m.at(i, q);
          m.at(i, p) = c * mip - s * miq;
          m.at(i, q) = s * mip + c * miq;
        }
        for (std::size_t i = 0; i < k; ++i) {
          const double mpi = m.at(p, i), mqi = m.at(q, i);
          m.at(p, i) = c * mpi - s * mqi;
          m.at(q, i) = s * mpi + c * mqi;
        }
        for (std::size_t i = 0; i < k; ++i) {
          const double vip = v.at(i, p), viq = v.at(i, q);
          v.at(i, p) = c * vip - s * viq;
          v.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<double> eig(k);
  for (std::size_t i = 0; i < k; ++i) eig[i] = m.at(i, i);
  // selection sort keeping vectors aligned
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t lo = i;
    for (std::size_t j = i + 1; j < k; ++j)
      if (eig[j] < eig[lo]) lo = j;
    if (lo != i) {
      std::swap(eig[i], eig[lo]);
      for (std::size_t r = 0; r < k; ++r) {
        const double tmp = v.at(r, i);
        v.at(r, i) = v.at(r, lo);
        v.at(r, lo) = tmp;
      }
    }
  }
  if (vectors) *vectors = v;
  return eig;
}

// Singular values of a rectangular matrix via the Gram matrix of the thinner
// side; fine at these sizes and conditioning.
inline std::vector<double> singular_values(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("singular_values: rank 2");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const bool tall = m >= n;
  const std::size_t k = tall ? n : m;
  Tensor gram({k, k});
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      if (tall)
        for (std::size_t p = 0; p < m; ++p) acc += a.at(p, i) * a.at(p, j);
      else
        for (std::size_t p = 0; p < n; ++p) acc += a.at(i, p) * a.at(j, p);
      gram.at(i, j) = acc;
    }
  std::vector<double> eig = sym_eig(gram);
  for (double& e : eig) e = std::sqrt(std::max(0.0, e));
  return eig;  // ascending
}

inline double cond2(const Tensor& a) {
  std::vector<double> sv = singular_values(a);
  const double lo = sv.front(), hi = sv.back();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

inline Tensor mat_inverse(const Tensor& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1))
    throw std::invalid_argument("mat_inverse: need square matrix");
  const std::size_t k = a.dim(0);
  Tensor m = a;
  Tensor inv({k, k});
  for (std::size_t i = 0; i < k; ++i) inv.at(i, i) = 1.0;
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::fabs(m.at(r, col)) > std::fabs(m.at(piv, col))) piv = r;
    if (std::fabs(m.at(piv, col)) < 1e-300)
      throw std::invalid_argument("mat_inverse: singular matrix");
    if (piv != col)
      for (std::size_t c = 0; c < k; ++c) {
        std::swap(m.at(piv, c), m.at(col, c));
        std::swap(inv.at(piv, c), inv.at(col, c));
      }
    const double d = m.at(col, col);
    for (std::size_t c = 0; c < k; ++c) {
      m.at(col, c) /= d;
      inv.at(col, c) /= d;
    }
    for (std::size_t r = 0; r < k; ++r) {
      if (r == col) continue;
      const double f = m.at(r, col);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < k; ++c) {
        m.at(r, c) -= f * m.at(col, c);
        inv.at(r, c) -= f * inv.at(col, c);
      }
    }
  }
  return inv;
}

}  // namespace vaedim
