#pragma once

// Independent references for the MPC tests: direct rollout cost, brute-force
// grid search and plain Gaussian elimination.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "kmpc/mpc.hpp"
#include "kmpc/rng.hpp"

namespace oracle {

using kmpc::Matrix;
using kmpc::Vector;

inline Matrix random_matrix(kmpc::Rng& rng, std::size_t r, std::size_t c, double scale) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(-scale, scale);
  return m;
}

inline Vector random_vector(kmpc::Rng& rng, std::size_t n, double lo, double hi) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// M^T M + shift I.
inline Matrix random_psd(kmpc::Rng& rng, std::size_t n, double shift) {
  const Matrix m = random_matrix(rng, n, n, 1.0);
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = i == j ? shift : 0.0;
      for (std::size_t k = 0; k < n; ++k) s += m(k, i) * m(k, j);
      p(i, j) = s;
    }
  return p;
}

inline kmpc::MpcProblem random_problem(kmpc::Rng& rng, std::size_t big_n, std::size_t m,
                                       std::size_t horizon) {
  kmpc::MpcProblem p;
  p.a = random_matrix(rng, big_n, big_n, 0.9 / std::sqrt(static_cast<double>(big_n)));
  p.b = random_matrix(rng, big_n, m, 1.0);
  p.z = random_vector(rng, big_n, -1.0, 1.0);
  p.z_ref = random_vector(rng, big_n, -1.0, 1.0);
  p.horizon = horizon;
  p.q = random_psd(rng, big_n, 0.1);
  p.r = rng.uniform(0.0, 1.0) < 0.5 ? Matrix(m, m) : random_psd(rng, m, 0.0);
  p.u_min = random_vector(rng, m, -1.0, 0.0);
  p.u_max = random_vector(rng, m, 0.0, 1.0);
  return p;
}

inline double quad(const Matrix& w, const Vector& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) s += x[i] * w(i, j) * x[j];
  return s;
}

// Cost summed along an explicit rollout of z+ = A z + B u.
inline double direct_cost(const kmpc::MpcProblem& p, const Vector& u) {
  const std::size_t n = p.a.rows(), m = p.b.cols();
  Vector z = p.z;
  double cost = 0.0;
  for (std::size_t k = 0; k < p.horizon; ++k) {
    Vector next(n, 0.0), uk(u.begin() + static_cast<std::ptrdiff_t>(k * m),
                            u.begin() + static_cast<std::ptrdiff_t>((k + 1) * m));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) next[i] += p.a(i, j) * z[j];
      for (std::size_t l = 0; l < m; ++l) next[i] += p.b(i, l) * uk[l];
    }
    z = next;
    Vector e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = z[i] - p.z_ref[i];
    cost += quad(p.q, e) + quad(p.r, uk);
  }
  return cost;
}

// Smallest value of f over a uniform grid with `points` per coordinate.
inline double grid_minimum(const Vector& lo, const Vector& hi, std::size_t points,
                           const std::function<double(const Vector&)>& f) {
  const std::size_t dim = lo.size();
  std::vector<std::size_t> idx(dim, 0);
  Vector x(dim);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    for (std::size_t i = 0; i < dim; ++i)
      x[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(idx[i]) / static_cast<double>(points - 1);
    best = std::min(best, f(x));
    std::size_t i = 0;
    while (i < dim && ++idx[i] == points) idx[i++] = 0;
    if (i == dim) break;
  }
  return best;
}

// Solves G x = rhs by elimination with partial pivoting.
inline Vector gauss_solve(Matrix g, Vector rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(g(r, c)) > std::abs(g(piv, c))) piv = r;
    for (std::size_t k = 0; k < n; ++k) std::swap(g(c, k), g(piv, k));
    std::swap(rhs[c], rhs[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = g(r, c) / g(c, c);
      for (std::size_t k = c; k < n; ++k) g(r, k) -= f * g(c, k);
      rhs[r] -= f * rhs[c];
    }
  }
  Vector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= g(i, k) * x[k];
    x[i] = s / g(i, i);
  }
  return x;
}

// Box QP whose unconstrained minimizer lies strictly inside the box.
struct InteriorQp {
  kmpc::CondensedQp qp;
  Vector expected;
};

inline InteriorQp interior_qp(kmpc::Rng& rng, std::size_t dim) {
  InteriorQp out;
  kmpc::CondensedQp& qp = out.qp;
  qp.horizon = 1;
  qp.m = dim;
  qp.hessian = random_psd(rng, dim, 0.5);
  const Vector target = random_vector(rng, dim, -0.5, 0.5);
  qp.linear.assign(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) qp.linear[i] -= qp.hessian(i, j) * target[j];
  qp.lower.assign(dim, -1.0);
  qp.upper.assign(dim, 1.0);
  Vector rhs(dim);
  for (std::size_t i = 0; i < dim; ++i) rhs[i] = -qp.linear[i];
  out.expected = gauss_solve(qp.hessian, rhs);
  return out;
}

}  // namespace oracle
