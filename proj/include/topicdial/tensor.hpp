#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace topicdial {

// Dense row-major matrix of doubles. A vector is stored as 1 x n.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Tensor& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

// Named tensor collection for parameters, gradients and optimizer moments.
// std::map keeps iteration order stable so initialization, updates and
// serialization are deterministic.
using TensorMap = std::map<std::string, Tensor>;

bool all_finite(const Tensor& t);
bool all_finite(const TensorMap& m);

}  // namespace topicdial
