#pragma once
// Named trainable parameters with their optimizer state.  Models register
// tensors once at construction; training binds them onto a fresh tape every
// step and updates them in place.

#include <stdexcept>
#include <string>
#include <vector>

#include "evtol/tape.hpp"
#include "evtol/tensor.hpp"

namespace evtol {

struct NamedParam {
  std::string name;
  Tensor value;
  AdamState adam;
};

class ParamStore {
 public:
  int add(std::string name, Tensor value) {
    items_.push_back(NamedParam{std::move(name), std::move(value), AdamState{}});
    return static_cast<int>(items_.size()) - 1;
  }

  NamedParam& operator[](int i) { return items_[i]; }
  const NamedParam& operator[](int i) const { return items_[i]; }
  int size() const { return static_cast<int>(items_.size()); }

  long scalar_count() const {
    long n = 0;
    for (const auto& p : items_) n += static_cast<long>(p.value.size());
    return n;
  }

  int index_of(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
      if (items_[i].name == name) return i;
    throw std::out_of_range("ParamStore: no parameter named " + name);
  }

  // Bind every parameter as a trainable leaf; leaves[i] pairs with items_[i].
  std::vector<Var> bind(Tape& tape) const {
    std::vector<Var> leaves(items_.size());
    for (int i = 0; i < size(); ++i) leaves[i] = tape.leaf(items_[i].value, true, i);
    return leaves;
  }

  // Apply one optimizer update from the tape's accumulated gradients.
  void adam_update(Tape& tape, const std::vector<Var>& leaves, double lr) {
    for (int i = 0; i < size(); ++i)
      adam_step(items_[i].value, tape.grad(leaves[i]), items_[i].adam, lr, items_[i].name);
  }

  // Same, from externally accumulated gradients (one per parameter).
  void adam_update(const std::vector<Tensor>& grads, double lr) {
    if (static_cast<int>(grads.size()) != size())
      throw std::invalid_argument("ParamStore::adam_update: gradient count mismatch");
    for (int i = 0; i < size(); ++i)
      adam_step(items_[i].value, grads[i], items_[i].adam, lr, items_[i].name);
  }

  // Zeroed gradient accumulators, one per parameter, shape-matched.
  std::vector<Tensor> grad_accumulators() const {
    std::vector<Tensor> g;
    g.reserve(items_.size());
    for (const auto& p : items_) g.push_back(Tensor(p.value.rows(), p.value.cols()));
    return g;
  }

  std::vector<Tensor> snapshot() const {
    std::vector<Tensor> s;
    s.reserve(items_.size());
    for (const auto& p : items_) s.push_back(p.value.clone());
    return s;
  }

  void restore(const std::vector<Tensor>& snap) {
    if (snap.size() != items_.size())
      throw std::invalid_argument("ParamStore::restore: snapshot size mismatch");
    for (std::size_t i = 0; i < snap.size(); ++i) {
      if (!items_[i].value.same_shape(snap[i]))
        throw std::invalid_argument("ParamStore::restore: shape mismatch at " + items_[i].name);
      for (std::size_t k = 0; k < snap[i].size(); ++k) items_[i].value[k] = snap[i][k];
    }
  }

 private:
  std::vector<NamedParam> items_;
};

}  // namespace evtol
