#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kmpc/simd/kernels.hpp"

namespace kmpc::simd {

#if defined(KMPC_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(KMPC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

// KMPC_SIMD=scalar forces the reference kernels.
const KernelTable* detect() {
  const char* env = std::getenv("KMPC_SIMD");
  if (env != nullptr && std::string_view(env) == "scalar") return &scalar_kernels();
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(KMPC_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

bool select_backend(Backend backend) {
  const KernelTable* t =
      backend == Backend::avx2 ? avx2_kernels() : &scalar_kernels();
  if (t == nullptr) return false;
  active().store(t, std::memory_order_release);
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

}  // namespace kmpc::simd
