#include "kmpc/simd/kernels.hpp"

namespace kmpc::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* w, std::size_t rows, std::size_t cols,
                 const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot_scalar(w + r * cols, x, cols);
}

void gemv_t_scalar(const double* w, std::size_t rows, std::size_t cols,
                   const double* g, double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (g[r] != 0.0) axpy_scalar(g[r], w + r * cols, x, cols);
  }
}

void ger_scalar(double* w, std::size_t rows, std::size_t cols, const double* g,
                const double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (g[r] != 0.0) axpy_scalar(g[r], x, w + r * cols, cols);
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Backend::scalar, "scalar", dot_scalar,
                                 axpy_scalar,     gemv_scalar, gemv_t_scalar,
                                 ger_scalar};
  return table;
}

}  // namespace kmpc::simd
