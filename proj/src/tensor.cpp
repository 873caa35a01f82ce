#include "topicdial/tensor.hpp"

#include <cmath>

namespace topicdial {

bool all_finite(const Tensor& t) {
  for (double x : t.data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(const TensorMap& m) {
  for (const auto& [name, t] : m) {
    if (!all_finite(t)) return false;
  }
  return true;
}

}  // namespace topicdial
