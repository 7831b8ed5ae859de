#pragma once
// Reverse-mode automatic differentiation on dense f64 tensors.
//
// A Tape records an eager forward pass as a flat list of nodes; backward()
// walks the list in reverse, accumulating gradients additively so values
// feeding several consumers receive every contribution.  Tapes are
// single-threaded and rebuilt per training step; parameters live outside
// the tape and are bound as leaves each pass.

#include <cstdint>
#include <string>
#include <vector>

#include "evtol/tensor.hpp"

namespace evtol {

using Var = int;

enum class Op : std::uint8_t {
  kLeaf,
  kMatmul,        // flags ta/tb: A^T and/or B^T
  kAdd,
  kSub,
  kMul,           // elementwise
  kEMin,          // elementwise min
  kAddBias,       // (n x d) + (1 x d)
  kMulBias,       // (n x d) * (1 x d)
  kScale,         // * c0
  kAddConst,      // + c0
  kClamp,         // clamp to [c0, c1]; gradient 0 outside
  kRelu,
  kTanh,
  kExp,
  kLog,
  kSoftplus,
  kSoftmaxRows,
  kSoftmaxCausal, // square matrix; row i attends to columns 0..i
  kLayerNormRows, // per-row normalize, epsilon c0
  kDropout,       // mask saved in aux (0 or 1/keep)
  kConcatCols,
  kSliceCols,     // [c0, c1)
  kSliceRows,     // [c0, c1)
  kSumAll,        // -> 1x1
  kSumCols,       // (n x d) -> (n x 1)
};

struct Node {
  Op op = Op::kLeaf;
  Tensor value;
  Tensor grad;                 // allocated during backward when needed
  int p0 = -1, p1 = -1;
  std::vector<int> parents;    // used by concat
  Tensor aux;                  // dropout mask, layernorm stats, ...
  double c0 = 0.0, c1 = 0.0;
  bool ta = false, tb = false;
  bool wants_grad = false;
  int param = -1;              // index into an external parameter list, if any
};

class Tape {
 public:
  // Leaves.  `param_index` >= 0 marks a trainable leaf whose gradient is kept.
  Var leaf(const Tensor& v, bool requires_grad = false, int param_index = -1);

  Var matmul(Var a, Var b, bool ta = false, bool tb = false);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var emin(Var a, Var b);
  Var add_bias(Var x, Var bias);
  Var mul_bias(Var x, Var bias);
  Var scale(Var x, double c);
  Var add_const(Var x, double c);
  Var clamp(Var x, double lo, double hi);
  Var relu(Var x);
  Var tanh_(Var x);
  Var exp_(Var x);
  Var log_(Var x);
  Var softplus(Var x);
  Var softmax_rows(Var x);
  Var softmax_causal(Var x);
  Var layer_norm_rows(Var x, double eps = 1e-5);
  Var dropout(Var x, double rate, Rng& rng);
  Var concat_cols(const std::vector<Var>& xs);
  Var slice_cols(Var x, int c0, int c1);
  Var slice_rows(Var x, int r0, int r1);
  Var sum_all(Var x);
  Var sum_cols(Var x);
  Var mean_all(Var x);

  // Returned by value (cheap shared-storage handle): the node vector may
  // reallocate on later op pushes, so references into it must not escape.
  Tensor value(Var v) const { return nodes_[v].value; }
  Tensor grad(Var v) const;

  // Reverse pass from a scalar (1x1) node.  Calling twice is an error.
  void backward(Var loss);

  std::size_t node_count() const { return nodes_.size(); }
  const Node& node(Var v) const { return nodes_[v]; }

  // (param_index, leaf var) pairs for every trainable leaf on this tape.
  const std::vector<std::pair<int, Var>>& param_leaves() const { return param_leaves_; }

 private:
  Var push(Node n);
  Tensor& grad_buf(Var v);

  std::vector<Node> nodes_;
  std::vector<std::pair<int, Var>> param_leaves_;
  bool backward_done_ = false;
};

// Adam with bias correction; hyperparameters beta1=0.9, beta2=0.999, eps=1e-8.
struct AdamState {
  Tensor m, v;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// One update in place; throws (naming `name`) on non-finite gradient.
void adam_step(Tensor& param, const Tensor& grad, AdamState& st, double lr,
               const std::string& name);

}  // namespace evtol
