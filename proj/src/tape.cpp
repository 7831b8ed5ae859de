#include "evtol/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "evtol/kernels.hpp"

namespace evtol {
namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                              b.shape_str());
}

double stable_softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(Var v) {
  Node& n = nodes_[v];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.rows(), n.value.cols());
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v];
  if (n.grad.empty())
    throw std::logic_error("Tape::grad: node has no gradient (run backward first)");
  return n.grad;
}

Var Tape::leaf(const Tensor& v, bool requires_grad, int param_index) {
  Node n;
  n.op = Op::kLeaf;
  n.value = v;
  n.wants_grad = requires_grad;
  n.param = param_index;
  Var id = push(std::move(n));
  if (param_index >= 0) param_leaves_.emplace_back(param_index, id);
  return id;
}

Var Tape::matmul(Var a, Var b, bool ta, bool tb) {
  if (ta && tb) throw std::invalid_argument("matmul: double transpose unsupported");
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  const int m = ta ? A.cols() : A.rows();
  const int k = ta ? A.rows() : A.cols();
  const int kb = tb ? B.cols() : B.rows();
  const int nn = tb ? B.rows() : B.cols();
  if (k != kb) shape_error("matmul", A, B);
  Node n;
  n.op = Op::kMatmul;
  n.p0 = a;
  n.p1 = b;
  n.ta = ta;
  n.tb = tb;
  n.wants_grad = nodes_[a].wants_grad || nodes_[b].wants_grad;
  n.value = Tensor(m, nn);
  const auto& K = kern::active();
  if (!ta && !tb)
    K.gemm_nn(A.data(), B.data(), n.value.data(), m, k, nn, false);
  else if (!ta && tb)
    K.gemm_nt(A.data(), B.data(), n.value.data(), m, k, nn, false);
  else
    K.gemm_tn(A.data(), B.data(), n.value.data(), m, k, nn, false);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (!A.same_shape(B)) shape_error("add", A, B);
  Node n;
  n.op = Op::kAdd;
  n.p0 = a;
  n.p1 = b;
  n.wants_grad = nodes_[a].wants_grad || nodes_[b].wants_grad;
  n.value = Tensor(A.rows(), A.cols());
  kern::active().add(A.data(), B.data(), n.value.data(), static_cast<int>(A.size()));
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (!A.same_shape(B)) shape_error("sub", A, B);
  Node n;
  n.op = Op::kSub;
  n.p0 = a;
  n.p1 = b;
  n.wants_grad = nodes_[a].wants_grad || nodes_[b].wants_grad;
  n.value = Tensor(A.rows(), A.cols());
  kern::active().sub(A.data(), B.data(), n.value.data(), static_cast<int>(A.size()));
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (!A.same_shape(B)) shape_error("mul", A, B);
  Node n;
  n.op = Op::kMul;
  n.p0 = a;
  n.p1 = b;
  n.wants_grad = nodes_[a].wants_grad || nodes_[b].wants_grad;
  n.value = Tensor(A.rows(), A.cols());
  kern::active().mul(A.data(), B.data(), n.value.data(), static_cast<int>(A.size()));
  return push(std::move(n));
}

Var Tape::emin(Var a, Var b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (!A.same_shape(B)) shape_error("emin", A, B);
  Node n;
  n.op = Op::kEMin;
  n.p0 = a;
  n.p1 = b;
  n.wants_grad = nodes_[a].wants_grad || nodes_[b].wants_grad;
  n.value = Tensor(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] = A[i] <= B[i] ? A[i] : B[i];
  return push(std::move(n));
}

Var Tape::add_bias(Var x, Var bias) {
  const Tensor& X = nodes_[x].value;
  const Tensor& B = nodes_[bias].value;
  if (B.rows() != 1 || B.cols() != X.cols()) shape_error("add_bias", X, B);
  Node n;
  n.op = Op::kAddBias;
  n.p0 = x;
  n.p1 = bias;
  n.wants_grad = nodes_[x].wants_grad || nodes_[bias].wants_grad;
  n.value = Tensor(X.rows(), X.cols());
  for (int r = 0; r < X.rows(); ++r)
    kern::active().add(X.data() + static_cast<std::size_t>(r) * X.cols(), B.data(),
                       n.value.data() + static_cast<std::size_t>(r) * X.cols(), X.cols());
  return push(std::move(n));
}

Var Tape::mul_bias(Var x, Var bias) {
  const Tensor& X = nodes_[x].value;
  const Tensor& B = nodes_[bias].value;
  if (B.rows() != 1 || B.cols() != X.cols()) shape_error("mul_bias", X, B);
  Node n;
  n.op = Op::kMulBias;
  n.p0 = x;
  n.p1 = bias;
  n.wants_grad = nodes_[x].wants_grad || nodes_[bias].wants_grad;
  n.value = Tensor(X.rows(), X.cols());
  for (int r = 0; r < X.rows(); ++r)
    kern::active().mul(X.data() + static_cast<std::size_t>(r) * X.cols(), B.data(),
                       n.value.data() + static_cast<std::size_t>(r) * X.cols(), X.cols());
  return push(std::move(n));
}

Var Tape::scale(Var x, double c) {
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kScale;
  n.p0 = x;
  n.c0 = c;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(X.rows(), X.cols());
  kern::active().scale(c, X.data(), n.value.data(), static_cast<int>(X.size()));
  return push(std::move(n));
}

Var Tape::add_const(Var x, double c) {
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kAddConst;
  n.p0 = x;
  n.c0 = c;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.size(); ++i) n.value[i] = X[i] + c;
  return push(std::move(n));
}

Var Tape::clamp(Var x, double lo, double hi) {
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kClamp;
  n.p0 = x;
  n.c0 = lo;
  n.c1 = hi;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.size(); ++i)
    n.value[i] = X[i] < lo ? lo : (X[i] > hi ? hi : X[i]);
  return push(std::move(n));
}

Var Tape::relu(Var x) {
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kRelu;
  n.p0 = x;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.size(); ++i) n.value[i] = X[i] > 0.0 ? X[i] : 0.0;
  return push(std::move(n));
}

Var Tape::tanh_(Var x) {
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kTanh;
  n.p0 = x;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.size(); ++i) n.value[i] = std::tanh(X[i]);
  return push(std::move(n));
}

Var Tape::exp_(Var x) {
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kExp;
  n.p0 = x;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.size(); ++i) n.value[i] = std::exp(X[i]);
  return push(std::move(n));
}

Var Tape::log_(Var x) {
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kLog;
  n.p0 = x;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.size(); ++i) n.value[i] = std::log(X[i]);
  return push(std::move(n));
}

Var Tape::softplus(Var x) {
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kSoftplus;
  n.p0 = x;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.size(); ++i) n.value[i] = stable_softplus(X[i]);
  return push(std::move(n));
}

Var Tape::softmax_rows(Var x) {
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kSoftmaxRows;
  n.p0 = x;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(X.rows(), X.cols());
  for (int r = 0; r < X.rows(); ++r) {
    const double* xr = X.data() + static_cast<std::size_t>(r) * X.cols();
    double* yr = n.value.data() + static_cast<std::size_t>(r) * X.cols();
    double mx = xr[0];
    for (int j = 1; j < X.cols(); ++j) mx = std::max(mx, xr[j]);
    double s = 0.0;
    for (int j = 0; j < X.cols(); ++j) {
      yr[j] = std::exp(xr[j] - mx);
      s += yr[j];
    }
    const double inv = 1.0 / s;
    for (int j = 0; j < X.cols(); ++j) yr[j] *= inv;
  }
  return push(std::move(n));
}

Var Tape::softmax_causal(Var x) {
  const Tensor& X = nodes_[x].value;
  if (X.rows() != X.cols()) throw std::invalid_argument("softmax_causal: matrix must be square");
  Node n;
  n.op = Op::kSoftmaxCausal;
  n.p0 = x;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor::zeros(X.rows(), X.cols());
  for (int r = 0; r < X.rows(); ++r) {
    const double* xr = X.data() + static_cast<std::size_t>(r) * X.cols();
    double* yr = n.value.data() + static_cast<std::size_t>(r) * X.cols();
    double mx = xr[0];
    for (int j = 1; j <= r; ++j) mx = std::max(mx, xr[j]);
    double s = 0.0;
    for (int j = 0; j <= r; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      s += yr[j];
    }
    const double inv = 1.0 / s;
    for (int j = 0; j <= r; ++j) yr[j] *= inv;
    // columns r+1.. stay exactly zero: position r never sees later positions
  }
  return push(std::move(n));
}

Var Tape::layer_norm_rows(Var x, double eps) {
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kLayerNormRows;
  n.p0 = x;
  n.c0 = eps;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(X.rows(), X.cols());
  n.aux = Tensor(X.rows(), 1);  // per-row inverse stddev
  const int d = X.cols();
  for (int r = 0; r < X.rows(); ++r) {
    const double* xr = X.data() + static_cast<std::size_t>(r) * d;
    double* yr = n.value.data() + static_cast<std::size_t>(r) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xr[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = xr[j] - mean;
      var += c * c;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    n.aux[r] = inv;
    for (int j = 0; j < d; ++j) yr[j] = (xr[j] - mean) * inv;
  }
  return push(std::move(n));
}

Var Tape::dropout(Var x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kDropout;
  n.p0 = x;
  n.c0 = rate;
  n.wants_grad = nodes_[x].wants_grad;
  n.aux = Tensor(X.rows(), X.cols());
  n.value = Tensor(X.rows(), X.cols());
  const double keep_inv = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double m = rng.uniform() >= rate ? keep_inv : 0.0;
    n.aux[i] = m;
    n.value[i] = X[i] * m;
  }
  return push(std::move(n));
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int rows = nodes_[xs[0]].value.rows();
  int cols = 0;
  bool wants = false;
  for (Var v : xs) {
    if (nodes_[v].value.rows() != rows) shape_error("concat_cols", nodes_[xs[0]].value, nodes_[v].value);
    cols += nodes_[v].value.cols();
    wants = wants || nodes_[v].wants_grad;
  }
  Node n;
  n.op = Op::kConcatCols;
  n.parents.assign(xs.begin(), xs.end());
  n.wants_grad = wants;
  n.value = Tensor(rows, cols);
  int off = 0;
  for (Var v : xs) {
    const Tensor& P = nodes_[v].value;
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < P.cols(); ++j) n.value.at(r, off + j) = P.at(r, j);
    off += P.cols();
  }
  return push(std::move(n));
}

Var Tape::slice_cols(Var x, int c0, int c1) {
  const Tensor& X = nodes_[x].value;
  if (c0 < 0 || c1 > X.cols() || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," +
                                std::to_string(c1) + ") for " + X.shape_str());
  Node n;
  n.op = Op::kSliceCols;
  n.p0 = x;
  n.c0 = c0;
  n.c1 = c1;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(X.rows(), c1 - c0);
  for (int r = 0; r < X.rows(); ++r)
    for (int j = c0; j < c1; ++j) n.value.at(r, j - c0) = X.at(r, j);
  return push(std::move(n));
}

Var Tape::slice_rows(Var x, int r0, int r1) {
  const Tensor& X = nodes_[x].value;
  if (r0 < 0 || r1 > X.rows() || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range [" + std::to_string(r0) + "," +
                                std::to_string(r1) + ") for " + X.shape_str());
  Node n;
  n.op = Op::kSliceRows;
  n.p0 = x;
  n.c0 = r0;
  n.c1 = r1;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(r1 - r0, X.cols());
  for (int r = r0; r < r1; ++r)
    for (int j = 0; j < X.cols(); ++j) n.value.at(r - r0, j) = X.at(r, j);
  return push(std::move(n));
}

Var Tape::sum_all(Var x) {
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kSumAll;
  n.p0 = x;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(1, 1);
  n.value[0] = kern::active().sum(X.data(), static_cast<int>(X.size()));
  return push(std::move(n));
}

Var Tape::sum_cols(Var x) {
  const Tensor& X = nodes_[x].value;
  Node n;
  n.op = Op::kSumCols;
  n.p0 = x;
  n.wants_grad = nodes_[x].wants_grad;
  n.value = Tensor(X.rows(), 1);
  for (int r = 0; r < X.rows(); ++r) {
    n.value[r] =
        kern::active().sum(X.data() + static_cast<std::size_t>(r) * X.cols(), X.cols());
  }
  return push(std::move(n));
}

Var Tape::mean_all(Var x) {
  const Tensor& X = nodes_[x].value;
  return scale(sum_all(x), 1.0 / static_cast<double>(X.size()));
}

void Tape::backward(Var loss) {
  if (backward_done_) throw std::logic_error("Tape::backward: called twice on the same tape");
  backward_done_ = true;
  Node& ln = nodes_[loss];
  if (ln.value.rows() != 1 || ln.value.cols() != 1)
    throw std::invalid_argument("Tape::backward: loss must be 1x1, got " + ln.value.shape_str());
  grad_buf(loss)[0] = 1.0;

  const auto& K = kern::active();
  for (Var i = loss; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.wants_grad) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatmul: {
        Node& A = nodes_[n.p0];
        Node& B = nodes_[n.p1];
        const int m = g.rows(), nn = g.cols();
        const int k = n.ta ? A.value.rows() : A.value.cols();
        if (A.wants_grad) {
          Tensor& ga = grad_buf(n.p0);
          if (!n.ta && !n.tb)  // dA += g * B^T
            K.gemm_nt(g.data(), B.value.data(), ga.data(), m, nn, k, true);
          else if (!n.ta && n.tb)  // dA += g * B
            K.gemm_nn(g.data(), B.value.data(), ga.data(), m, nn, k, true);
          else  // ta: A stored (k x m); dA += B * g^T -> use tn on (g, ...) trick
            // dA[p,i] = sum_j B[p,j] g[i,j]  => dA = B * g^T : gemm_nt(B, g)
            K.gemm_nt(B.value.data(), g.data(), ga.data(), k, nn, m, true);
        }
        if (B.wants_grad) {
          Tensor& gb = grad_buf(n.p1);
          if (!n.ta && !n.tb)  // dB += A^T * g
            K.gemm_tn(A.value.data(), g.data(), gb.data(), k, m, nn, true);
          else if (!n.ta && n.tb)  // B stored (n x k); dB += g^T * A
            K.gemm_tn(g.data(), A.value.data(), gb.data(), nn, m, k, true);
          else  // ta: dB += A * g, A stored (k x m)
            K.gemm_nn(A.value.data(), g.data(), gb.data(), k, m, nn, true);
        }
        break;
      }
      case Op::kAdd: {
        if (nodes_[n.p0].wants_grad)
          K.axpy(1.0, g.data(), grad_buf(n.p0).data(), static_cast<int>(g.size()));
        if (nodes_[n.p1].wants_grad)
          K.axpy(1.0, g.data(), grad_buf(n.p1).data(), static_cast<int>(g.size()));
        break;
      }
      case Op::kSub: {
        if (nodes_[n.p0].wants_grad)
          K.axpy(1.0, g.data(), grad_buf(n.p0).data(), static_cast<int>(g.size()));
        if (nodes_[n.p1].wants_grad)
          K.axpy(-1.0, g.data(), grad_buf(n.p1).data(), static_cast<int>(g.size()));
        break;
      }
      case Op::kMul: {
        const Tensor& A = nodes_[n.p0].value;
        const Tensor& B = nodes_[n.p1].value;
        if (nodes_[n.p0].wants_grad) {
          Tensor& ga = grad_buf(n.p0);
          for (std::size_t t = 0; t < g.size(); ++t) ga[t] += g[t] * B[t];
        }
        if (nodes_[n.p1].wants_grad) {
          Tensor& gb = grad_buf(n.p1);
          for (std::size_t t = 0; t < g.size(); ++t) gb[t] += g[t] * A[t];
        }
        break;
      }
      case Op::kEMin: {
        const Tensor& A = nodes_[n.p0].value;
        const Tensor& B = nodes_[n.p1].value;
        if (nodes_[n.p0].wants_grad) {
          Tensor& ga = grad_buf(n.p0);
          for (std::size_t t = 0; t < g.size(); ++t)
            if (A[t] <= B[t]) ga[t] += g[t];
        }
        if (nodes_[n.p1].wants_grad) {
          Tensor& gb = grad_buf(n.p1);
          for (std::size_t t = 0; t < g.size(); ++t)
            if (A[t] > B[t]) gb[t] += g[t];
        }
        break;
      }
      case Op::kAddBias: {
        if (nodes_[n.p0].wants_grad)
          K.axpy(1.0, g.data(), grad_buf(n.p0).data(), static_cast<int>(g.size()));
        if (nodes_[n.p1].wants_grad) {
          Tensor& gb = grad_buf(n.p1);
          for (int r = 0; r < g.rows(); ++r)
            K.axpy(1.0, g.data() + static_cast<std::size_t>(r) * g.cols(), gb.data(), g.cols());
        }
        break;
      }
      case Op::kMulBias: {
        const Tensor& X = nodes_[n.p0].value;
        const Tensor& B = nodes_[n.p1].value;
        if (nodes_[n.p0].wants_grad) {
          Tensor& gx = grad_buf(n.p0);
          for (int r = 0; r < g.rows(); ++r) {
            const double* gr = g.data() + static_cast<std::size_t>(r) * g.cols();
            double* gxr = gx.data() + static_cast<std::size_t>(r) * g.cols();
            for (int j = 0; j < g.cols(); ++j) gxr[j] += gr[j] * B[j];
          }
        }
        if (nodes_[n.p1].wants_grad) {
          Tensor& gb = grad_buf(n.p1);
          for (int r = 0; r < g.rows(); ++r) {
            const double* gr = g.data() + static_cast<std::size_t>(r) * g.cols();
            const double* xr = X.data() + static_cast<std::size_t>(r) * g.cols();
            for (int j = 0; j < g.cols(); ++j) gb[j] += gr[j] * xr[j];
          }
        }
        break;
      }
      case Op::kScale: {
        if (nodes_[n.p0].wants_grad)
          K.axpy(n.c0, g.data(), grad_buf(n.p0).data(), static_cast<int>(g.size()));
        break;
      }
      case Op::kAddConst: {
        if (nodes_[n.p0].wants_grad)
          K.axpy(1.0, g.data(), grad_buf(n.p0).data(), static_cast<int>(g.size()));
        break;
      }
      case Op::kClamp: {
        if (nodes_[n.p0].wants_grad) {
          const Tensor& X = nodes_[n.p0].value;
          Tensor& gx = grad_buf(n.p0);
          for (std::size_t t = 0; t < g.size(); ++t)
            if (X[t] >= n.c0 && X[t] <= n.c1) gx[t] += g[t];
        }
        break;
      }
      case Op::kRelu: {
        if (nodes_[n.p0].wants_grad) {
          const Tensor& X = nodes_[n.p0].value;
          Tensor& gx = grad_buf(n.p0);
          for (std::size_t t = 0; t < g.size(); ++t)
            if (X[t] > 0.0) gx[t] += g[t];
        }
        break;
      }
      case Op::kTanh: {
        if (nodes_[n.p0].wants_grad) {
          Tensor& gx = grad_buf(n.p0);
          for (std::size_t t = 0; t < g.size(); ++t) gx[t] += g[t] * (1.0 - n.value[t] * n.value[t]);
        }
        break;
      }
      case Op::kExp: {
        if (nodes_[n.p0].wants_grad) {
          Tensor& gx = grad_buf(n.p0);
          for (std::size_t t = 0; t < g.size(); ++t) gx[t] += g[t] * n.value[t];
        }
        break;
      }
      case Op::kLog: {
        if (nodes_[n.p0].wants_grad) {
          const Tensor& X = nodes_[n.p0].value;
          Tensor& gx = grad_buf(n.p0);
          for (std::size_t t = 0; t < g.size(); ++t) gx[t] += g[t] / X[t];
        }
        break;
      }
      case Op::kSoftplus: {
        if (nodes_[n.p0].wants_grad) {
          const Tensor& X = nodes_[n.p0].value;
          Tensor& gx = grad_buf(n.p0);
          for (std::size_t t = 0; t < g.size(); ++t)
            gx[t] += g[t] / (1.0 + std::exp(-X[t]));
        }
        break;
      }
      case Op::kSoftmaxRows: {
        if (nodes_[n.p0].wants_grad) {
          Tensor& gx = grad_buf(n.p0);
          const Tensor& Y = n.value;
          for (int r = 0; r < g.rows(); ++r) {
            const double* gr = g.data() + static_cast<std::size_t>(r) * g.cols();
            const double* yr = Y.data() + static_cast<std::size_t>(r) * g.cols();
            double dotgy = 0.0;
            for (int j = 0; j < g.cols(); ++j) dotgy += gr[j] * yr[j];
            double* gxr = gx.data() + static_cast<std::size_t>(r) * g.cols();
            for (int j = 0; j < g.cols(); ++j) gxr[j] += yr[j] * (gr[j] - dotgy);
          }
        }
        break;
      }
      case Op::kSoftmaxCausal: {
        if (nodes_[n.p0].wants_grad) {
          Tensor& gx = grad_buf(n.p0);
          const Tensor& Y = n.value;
          for (int r = 0; r < g.rows(); ++r) {
            const double* gr = g.data() + static_cast<std::size_t>(r) * g.cols();
            const double* yr = Y.data() + static_cast<std::size_t>(r) * g.cols();
            double dotgy = 0.0;
            for (int j = 0; j <= r; ++j) dotgy += gr[j] * yr[j];
            double* gxr = gx.data() + static_cast<std::size_t>(r) * g.cols();
            for (int j = 0; j <= r; ++j) gxr[j] += yr[j] * (gr[j] - dotgy);
          }
        }
        break;
      }
      case Op::kLayerNormRows: {
        if (nodes_[n.p0].wants_grad) {
          Tensor& gx = grad_buf(n.p0);
          const Tensor& Y = n.value;
          const int d = g.cols();
          for (int r = 0; r < g.rows(); ++r) {
            const double* gr = g.data() + static_cast<std::size_t>(r) * d;
            const double* yr = Y.data() + static_cast<std::size_t>(r) * d;
            double gmean = 0.0, gymean = 0.0;
            for (int j = 0; j < d; ++j) {
              gmean += gr[j];
              gymean += gr[j] * yr[j];
            }
            gmean /= d;
            gymean /= d;
            const double inv = n.aux[r];
            double* gxr = gx.data() + static_cast<std::size_t>(r) * d;
            for (int j = 0; j < d; ++j) gxr[j] += inv * (gr[j] - gmean - yr[j] * gymean);
          }
        }
        break;
      }
      case Op::kDropout: {
        if (nodes_[n.p0].wants_grad) {
          Tensor& gx = grad_buf(n.p0);
          for (std::size_t t = 0; t < g.size(); ++t) gx[t] += g[t] * n.aux[t];
        }
        break;
      }
      case Op::kConcatCols: {
        int off = 0;
        for (Var pv : n.parents) {
          Node& P = nodes_[pv];
          const int pc = P.value.cols();
          if (P.wants_grad) {
            Tensor& gp = grad_buf(pv);
            for (int r = 0; r < g.rows(); ++r)
              for (int j = 0; j < pc; ++j) gp.at(r, j) += g.at(r, off + j);
          }
          off += pc;
        }
        break;
      }
      case Op::kSliceCols: {
        if (nodes_[n.p0].wants_grad) {
          Tensor& gx = grad_buf(n.p0);
          const int c0 = static_cast<int>(n.c0);
          for (int r = 0; r < g.rows(); ++r)
            for (int j = 0; j < g.cols(); ++j) gx.at(r, c0 + j) += g.at(r, j);
        }
        break;
      }
      case Op::kSliceRows: {
        if (nodes_[n.p0].wants_grad) {
          Tensor& gx = grad_buf(n.p0);
          const int r0 = static_cast<int>(n.c0);
          for (int r = 0; r < g.rows(); ++r)
            for (int j = 0; j < g.cols(); ++j) gx.at(r0 + r, j) += g.at(r, j);
        }
        break;
      }
      case Op::kSumAll: {
        if (nodes_[n.p0].wants_grad) {
          Tensor& gx = grad_buf(n.p0);
          const double gv = g[0];
          for (std::size_t t = 0; t < gx.size(); ++t) gx[t] += gv;
        }
        break;
      }
      case Op::kSumCols: {
        if (nodes_[n.p0].wants_grad) {
          Tensor& gx = grad_buf(n.p0);
          for (int r = 0; r < gx.rows(); ++r) {
            const double gv = g[r];
            double* gxr = gx.data() + static_cast<std::size_t>(r) * gx.cols();
            for (int j = 0; j < gx.cols(); ++j) gxr[j] += gv;
          }
        }
        break;
      }
    }
  }
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& st, double lr,
               const std::string& name) {
  if (!param.same_shape(grad))
    throw std::invalid_argument("adam_step(" + name + "): shape mismatch " + param.shape_str() +
                                " vs " + grad.shape_str());
  if (!grad.all_finite())
    throw std::runtime_error("adam_step: non-finite gradient for parameter '" + name + "'");
  if (st.m.empty()) {
    st.m = Tensor::zeros(param.rows(), param.cols());
    st.v = Tensor::zeros(param.rows(), param.cols());
  }
  st.step += 1;
  const double b1 = st.beta1, b2 = st.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double gi = grad[i];
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * gi;
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * gi * gi;
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

}  // namespace evtol
