#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvae/tensor.hpp"

namespace cvae {

// A labeled dataset: row-major samples plus per-factor integer labels.
// Factors are empty for datasets without ground-truth generative factors.
struct Dataset {
  std::string name;
  Tensor2 samples;  // n x dim
  std::vector<std::string> factor_names;
  std::vector<std::size_t> factor_cardinalities;
  std::vector<std::vector<int>> factor_values;  // one column per factor, length n
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.rows; }
  std::size_t dim() const { return samples.cols; }
};

// Procedural 16x16 binary shapes: every combination of
// shape {square, ellipse} x scale {3} x pos_x {8} x pos_y {8}, 384 images.
// Purely deterministic; regeneration is always bit-identical.
Dataset generate_mini_shapes();

inline constexpr std::size_t kMiniShapesSide = 16;
inline constexpr std::size_t kMiniShapesCount = 384;

// k-component Gaussian mixture with unit covariance and means spaced far
// apart (10 sigma along rotating axes). Labels record the component draw.
Dataset generate_gauss_mixture(std::size_t k, std::size_t dim, std::size_t n,
                               std::uint64_t seed);

// Dataset file: u32 little-endian header length, JSON header (name, dims,
// seed, factor metadata), then n*dim float64 samples little-endian.
// save_dataset also writes "<path>.factors.json" with the factor tables.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace cvae
