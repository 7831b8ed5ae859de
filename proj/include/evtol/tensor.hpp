#pragma once
// Dense row-major 64-bit float matrix with shared storage.  Row vectors are
// (1 x n).  Storage is written during construction and treated as immutable
// once the tensor participates in a tape, except for parameter tensors which
// the optimizer updates in place between tapes.

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "evtol/rng.hpp"

namespace evtol {

class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative shape");
    data_ = std::shared_ptr<double[]>(new double[size()]());
  }

  static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }

  static Tensor full(int rows, int cols, double v) {
    Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t.data_[i] = v;
    return t;
  }

  static Tensor from(int rows, int cols, std::vector<double> v) {
    Tensor t(rows, cols);
    if (v.size() != t.size()) throw std::invalid_argument("Tensor::from: size mismatch");
    for (std::size_t i = 0; i < t.size(); ++i) t.data_[i] = v[i];
    return t;
  }

  static Tensor randn(int rows, int cols, Rng& rng, double stddev = 1.0) {
    Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t.data_[i] = stddev * rng.normal();
    return t;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return static_cast<std::size_t>(rows_) * cols_; }
  bool empty() const { return size() == 0; }

  double* data() { return data_.get(); }
  const double* data() const { return data_.get(); }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  Tensor clone() const {
    Tensor t(rows_, cols_);
    for (std::size_t i = 0; i < size(); ++i) t.data_[i] = data_[i];
    return t;
  }

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  std::string shape_str() const {
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
  }

  bool all_finite() const;

 private:
  int rows_ = 0, cols_ = 0;
  std::shared_ptr<double[]> data_;
};

}  // namespace evtol
