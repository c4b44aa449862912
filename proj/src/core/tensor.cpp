#include "mixres/core/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mixres::core {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) {
    throw std::invalid_argument("tensor rank must be >= 1");
  }
  for (std::size_t d : shape_) {
    if (d == 0) throw std::invalid_argument("tensor dimensions must be positive");
  }
  if (shape_numel(shape_) != data_.size()) {
    throw std::invalid_argument(
        "tensor shape/data mismatch: shape holds " +
        std::to_string(shape_numel(shape_)) + " elements, data holds " +
        std::to_string(data_.size()));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("tensor entries must be finite");
    }
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

}  // namespace mixres::core
