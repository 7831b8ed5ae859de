#include "evtol/tensor.hpp"

#include <cmath>

namespace evtol {

bool Tensor::all_finite() const {
  for (std::size_t i = 0; i < size(); ++i)
    if (!std::isfinite(data_[i])) return false;
  return true;
}

}  // namespace evtol
