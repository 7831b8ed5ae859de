// AVX2 kernel variants.  Compiled with -mavx2 only (no FMA), so per-element
// multiply/add rounding matches the scalar reference; kernels that reduce
// (dot, sum, gemm_nt) use multiple accumulators and may differ from scalar
// in the last bits, which the equivalence tests bound.
#include "evtol/kernels.hpp"

#if defined(EVTOL_BUILD_AVX2) && defined(__AVX2__)
#include <immintrin.h>

namespace evtol::kern {
namespace {

inline double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void gemm_nn_v(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    if (!acc)
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      const __m256d va = _mm256_set1_pd(aip);
      const double* bp = b + static_cast<std::size_t>(p) * n;
      int j = 0;
      for (; j + 8 <= n; j += 8) {
        __m256d c0 = _mm256_loadu_pd(ci + j);
        __m256d c1 = _mm256_loadu_pd(ci + j + 4);
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(va, _mm256_loadu_pd(bp + j)));
        c1 = _mm256_add_pd(c1, _mm256_mul_pd(va, _mm256_loadu_pd(bp + j + 4)));
        _mm256_storeu_pd(ci + j, c0);
        _mm256_storeu_pd(ci + j + 4, c1);
      }
      for (; j + 4 <= n; j += 4) {
        __m256d c0 = _mm256_loadu_pd(ci + j);
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(va, _mm256_loadu_pd(bp + j)));
        _mm256_storeu_pd(ci + j, c0);
      }
      for (; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt_v(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      int p = 0;
      for (; p + 8 <= k; p += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(bj + p)));
        acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(ai + p + 4), _mm256_loadu_pd(bj + p + 4)));
      }
      double s = hsum4(_mm256_add_pd(acc0, acc1));
      for (; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void gemm_tn_v(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  if (!acc)
    for (std::size_t t = 0; t < static_cast<std::size_t>(m) * n; ++t) c[t] = 0.0;
  for (int p = 0; p < k; ++p) {
    const double* ap = a + static_cast<std::size_t>(p) * m;
    const double* bp = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const __m256d va = _mm256_set1_pd(ap[i]);
      double* ci = c + static_cast<std::size_t>(i) * n;
      int j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d c0 = _mm256_loadu_pd(ci + j);
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(va, _mm256_loadu_pd(bp + j)));
        _mm256_storeu_pd(ci + j, c0);
      }
      for (; j < n; ++j) ci[j] += ap[i] * bp[j];
    }
  }
}

double dot_v(const double* a, const double* b, int n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
  }
  double s = hsum4(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_v(double alpha, const double* x, double* y, int n) {
  const __m256d va = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_add_pd(yv, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_v(const double* a, const double* b, double* c, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

void sub_v(const double* a, const double* b, double* c, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] - b[i];
}

void mul_v(const double* a, const double* b, double* c, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

void scale_v(double alpha, const double* x, double* y, int n) {
  const __m256d va = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = alpha * x[i];
}

double sum_v(const double* x, int n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  double s = hsum4(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i];
  return s;
}

}  // namespace

const Ops* avx2_ops() {
  static const Ops ops = {
      "avx2", gemm_nn_v, gemm_nt_v, gemm_tn_v, dot_v, axpy_v,
      add_v,  sub_v,     mul_v,     scale_v,   sum_v,
  };
  return &ops;
}

}  // namespace evtol::kern

#else

namespace evtol::kern {
const Ops* avx2_ops() { return nullptr; }
}  // namespace evtol::kern

#endif
