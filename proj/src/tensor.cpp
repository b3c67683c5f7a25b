#include "cvae/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace cvae {

std::string Tensor2::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

bool Tensor2::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_shape(const Tensor2& t, std::size_t rows, std::size_t cols,
                   const char* what) {
  if (t.rows != rows || t.cols != cols) {
    throw std::invalid_argument(std::string(what) + ": expected shape " +
                                std::to_string(rows) + "x" + std::to_string(cols) +
                                ", got " + t.shape_str());
  }
}

}  // namespace cvae
