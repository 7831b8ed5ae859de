#pragma once
// Low-level dense f64 kernels behind the tensor library.
//
// Every kernel has a scalar reference implementation and, on x86-64 builds
// that support it, an AVX2 variant.  The active set is chosen once at
// startup by CPU detection and can be forced with EVTOL_SIMD=scalar|avx2.
// Variants are equivalence-tested against each other; transcendentals stay
// scalar (libm) in both sets so results are identical across dispatch.

#include <cstddef>

namespace evtol::kern {

struct Ops {
  const char* name;

  // C (m x n) = A (m x k) * B (k x n); accumulate adds into C instead of overwriting.
  void (*gemm_nn)(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
  // C (m x n) = A (m x k) * B^T, B stored (n x k).
  void (*gemm_nt)(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
  // C (m x n) = A^T * B, A stored (k x m), B (k x n).
  void (*gemm_tn)(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

  double (*dot)(const double* a, const double* b, int n);
  void (*axpy)(double alpha, const double* x, double* y, int n);  // y += alpha*x
  void (*add)(const double* a, const double* b, double* c, int n);
  void (*sub)(const double* a, const double* b, double* c, int n);
  void (*mul)(const double* a, const double* b, double* c, int n);
  void (*scale)(double alpha, const double* x, double* y, int n);  // y = alpha*x
  double (*sum)(const double* x, int n);
};

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when the build or CPU lacks AVX2

// Set selected on first use: EVTOL_SIMD env override, else CPU detection.
const Ops& active();

}  // namespace evtol::kern
