#include "kmpc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "kmpc/error.hpp"

namespace kmpc::linalg {

std::optional<Matrix> cholesky(const Matrix& spd, double rel_tol) {
  const std::size_t n = spd.rows();
  if (spd.cols() != n) throw ShapeError("cholesky: matrix not square");
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(spd(i, i)));
  const double floor = rel_tol * (max_diag > 0.0 ? max_diag : 1.0);

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = spd(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > floor)) return std::nullopt;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = spd(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Matrix cholesky_solve(const Matrix& lower, const Matrix& rhs) {
  const std::size_t n = lower.rows();
  if (rhs.rows() != n) throw ShapeError("cholesky_solve: rhs rows mismatch");
  Matrix x = rhs;
  const std::size_t k = rhs.cols();
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t j = 0; j < i; ++j) s -= lower(i, j) * x(j, c);
      x(i, c) = s / lower(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x(ii, c);
      for (std::size_t j = ii + 1; j < n; ++j) s -= lower(j, ii) * x(j, c);
      x(ii, c) = s / lower(ii, ii);
    }
  }
  return x;
}

Matrix pivoted_solve(const Matrix& a_in, const Matrix& rhs, double rel_tol) {
  const std::size_t n = a_in.rows();
  if (a_in.cols() != n) throw ShapeError("pivoted_solve: matrix not square");
  if (rhs.rows() != n) throw ShapeError("pivoted_solve: rhs rows mismatch");
  Matrix a = a_in;
  Matrix b = rhs;
  const std::size_t k = rhs.cols();
  std::vector<std::size_t> col_perm(n);
  std::iota(col_perm.begin(), col_perm.end(), 0);

  double scale = 0.0;
  for (double v : a.values()) scale = std::max(scale, std::abs(v));
  const double floor = rel_tol * (scale > 0.0 ? scale : 1.0);

  for (std::size_t p = 0; p < n; ++p) {
    std::size_t pr = p, pc = p;
    double best = -1.0;
    for (std::size_t i = p; i < n; ++i)
      for (std::size_t j = p; j < n; ++j)
        if (std::abs(a(i, j)) > best) {
          best = std::abs(a(i, j));
          pr = i;
          pc = j;
        }
    if (!(best > floor)) {
      throw SingularityError("linear system is rank deficient (pivot " +
                             std::to_string(best) + " at step " +
                             std::to_string(p) + " of " + std::to_string(n) +
                             "); add ridge regularization");
    }
    if (pr != p) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(p, j), a(pr, j));
      for (std::size_t j = 0; j < k; ++j) std::swap(b(p, j), b(pr, j));
    }
    if (pc != p) {
      for (std::size_t i = 0; i < n; ++i) std::swap(a(i, p), a(i, pc));
      std::swap(col_perm[p], col_perm[pc]);
    }
    for (std::size_t i = p + 1; i < n; ++i) {
      const double f = a(i, p) / a(p, p);
      if (f == 0.0) continue;
      for (std::size_t j = p; j < n; ++j) a(i, j) -= f * a(p, j);
      for (std::size_t j = 0; j < k; ++j) b(i, j) -= f * b(p, j);
    }
  }
  Matrix y(n, k);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = n; i-- > 0;) {
      double s = b(i, c);
      for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * y(j, c);
      y(i, c) = s / a(i, i);
    }
  }
  Matrix x(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) x(col_perm[i], c) = y(i, c);
  return x;
}

Matrix solve_symmetric(const Matrix& a, const Matrix& rhs) {
  if (auto l = cholesky(a)) return cholesky_solve(*l, rhs);
  return pivoted_solve(a, rhs);
}

double power_iteration(const Matrix& sym, int iterations) {
  const std::size_t n = sym.rows();
  if (n == 0) return 0.0;
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
  double nv = norm2(v);
  for (double& x : v) x /= nv;
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector w = matvec(sym, v);
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    lambda = std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
  }
  // Rayleigh quotient at the final iterate.
  Vector w = matvec(sym, v);
  lambda = std::max(lambda, std::inner_product(v.begin(), v.end(), w.begin(), 0.0));
  return lambda;
}

bool is_symmetric(const Matrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol) return false;
  return true;
}

Vector symmetric_eigenvalues(const Matrix& sym) {
  const std::size_t n = sym.rows();
  Matrix a = sym;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Vector ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

bool is_symmetric_psd(const Matrix& a, double tol) {
  if (!is_symmetric(a, tol)) return false;
  if (a.rows() == 0) return true;
  const Vector ev = symmetric_eigenvalues(a);
  return ev.front() >= -tol;
}

}  // namespace kmpc::linalg
