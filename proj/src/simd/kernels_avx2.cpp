// Compiled with -mavx2 -mfma. Only reached through the dispatch table after a
// CPU feature check.

#include "kmpc/simd/kernels.hpp"

#if defined(KMPC_HAVE_AVX2)

#include <immintrin.h>

namespace kmpc::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_avx2(const double* w, std::size_t rows, std::size_t cols,
               const double* x, double* y) {
  std::size_t r = 0;
  // Four rows at a time share the loads of x.
  for (; r + 4 <= rows; r += 4) {
    const double* w0 = w + r * cols;
    const double* w1 = w0 + cols;
    const double* w2 = w1 + cols;
    const double* w3 = w2 + cols;
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d vx = _mm256_loadu_pd(x + c);
      a0 = _mm256_fmadd_pd(_mm256_loadu_pd(w0 + c), vx, a0);
      a1 = _mm256_fmadd_pd(_mm256_loadu_pd(w1 + c), vx, a1);
      a2 = _mm256_fmadd_pd(_mm256_loadu_pd(w2 + c), vx, a2);
      a3 = _mm256_fmadd_pd(_mm256_loadu_pd(w3 + c), vx, a3);
    }
    double s0 = hsum(a0), s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
    for (; c < cols; ++c) {
      s0 += w0[c] * x[c];
      s1 += w1[c] * x[c];
      s2 += w2[c] * x[c];
      s3 += w3[c] * x[c];
    }
    y[r] += s0;
    y[r + 1] += s1;
    y[r + 2] += s2;
    y[r + 3] += s3;
  }
  for (; r < rows; ++r) y[r] += dot_avx2(w + r * cols, x, cols);
}

void gemv_t_avx2(const double* w, std::size_t rows, std::size_t cols,
                 const double* g, double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (g[r] != 0.0) axpy_avx2(g[r], w + r * cols, x, cols);
  }
}

void ger_avx2(double* w, std::size_t rows, std::size_t cols, const double* g,
              const double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (g[r] != 0.0) axpy_avx2(g[r], x, w + r * cols, cols);
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{Backend::avx2, "avx2",   dot_avx2,
                                 axpy_avx2,     gemv_avx2, gemv_t_avx2,
                                 ger_avx2};
  return table;
}

}  // namespace kmpc::simd

#endif
