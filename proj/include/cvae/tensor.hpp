#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cvae {

// Dense row-major matrix of doubles. The only tensor rank the engine needs:
// batches are rows, features are columns.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  static Tensor2 zeros(std::size_t r, std::size_t c) { return Tensor2(r, c); }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row_ptr(std::size_t r) { return data.data() + r * cols; }
  const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const;

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  bool all_finite() const;
};

// Throws std::invalid_argument naming both shapes when they differ.
void require_shape(const Tensor2& t, std::size_t rows, std::size_t cols,
                   const char* what);

}  // namespace cvae
