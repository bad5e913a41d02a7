#pragma once

// Dense double-precision kernels used by the training loop, the EDMD Gram
// accumulation and the QP solver. Every kernel has a scalar reference
// implementation and, on x86-64, an AVX2+FMA variant chosen at runtime.
//
// All matrices are row-major with an explicit row count and column count.
// The kernels accumulate into their output (y += ..., never y = ...).

#include <cstddef>
#include <span>
#include <string_view>

namespace kmpc::simd {

enum class Backend { scalar, avx2 };

struct KernelTable {
  Backend backend;
  std::string_view name;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y += W x, W is rows x cols
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols,
               const double* x, double* y);
  // x += W^T g, W is rows x cols
  void (*gemv_t)(const double* w, std::size_t rows, std::size_t cols,
                 const double* g, double* x);
  // W += g x^T, W is rows x cols
  void (*ger)(double* w, std::size_t rows, std::size_t cols, const double* g,
              const double* x);
};

const KernelTable& scalar_kernels();

// nullptr when the binary was built without AVX2 support or the CPU lacks
// AVX2/FMA.
const KernelTable* avx2_kernels();

// Active table. Resolved once from CPU features on first use.
const KernelTable& kernels();

// Forces a backend for the rest of the process. Returns false (and leaves
// the selection unchanged) when the backend is unavailable.
bool select_backend(Backend backend);

// Convenience wrappers over the active table.
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace kmpc::simd
