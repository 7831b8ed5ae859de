#include "evtol/kernels.hpp"

namespace evtol::kern {
namespace {

void gemm_nn_s(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    if (!acc)
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt_s(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void gemm_tn_s(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  // a stored (k x m): C[i,j] = sum_p a[p,i] * b[p,j]
  if (!acc)
    for (std::size_t t = 0; t < static_cast<std::size_t>(m) * n; ++t) c[t] = 0.0;
  for (int p = 0; p < k; ++p) {
    const double* ap = a + static_cast<std::size_t>(p) * m;
    const double* bp = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double api = ap[i];
      double* ci = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

double dot_s(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_s(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_s(const double* a, const double* b, double* c, int n) {
  for (int i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void sub_s(const double* a, const double* b, double* c, int n) {
  for (int i = 0; i < n; ++i) c[i] = a[i] - b[i];
}

void mul_s(const double* a, const double* b, double* c, int n) {
  for (int i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void scale_s(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = alpha * x[i];
}

double sum_s(const double* x, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += x[i];
  return s;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      "scalar", gemm_nn_s, gemm_nt_s, gemm_tn_s, dot_s, axpy_s,
      add_s,    sub_s,     mul_s,     scale_s,   sum_s,
  };
  return ops;
}

}  // namespace evtol::kern
