#include "cvae/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cvae/rng.hpp"

namespace cvae {

namespace {

void rasterize(Tensor2& img, std::size_t row, int shape, double half_extent,
               double cx, double cy) {
  const std::size_t side = kMiniShapesSide;
  for (std::size_t py = 0; py < side; ++py) {
    for (std::size_t px = 0; px < side; ++px) {
      const double dx = static_cast<double>(px) - cx;
      const double dy = static_cast<double>(py) - cy;
      bool inside;
      if (shape == 0) {  // square
        inside = std::abs(dx) <= half_extent && std::abs(dy) <= half_extent;
      } else {  // ellipse, flattened on y
        const double a = half_extent;
        const double b = 0.6 * half_extent + 0.4;
        inside = (dx * dx) / (a * a) + (dy * dy) / (b * b) <= 1.0;
      }
      img(row, py * side + px) = inside ? 1.0 : 0.0;
    }
  }
}

}  // namespace

Dataset generate_mini_shapes() {
  const double scales[3] = {1.5, 2.5, 3.5};
  Dataset d;
  d.name = "mini_shapes";
  d.samples = Tensor2(kMiniShapesCount, kMiniShapesSide * kMiniShapesSide);
  d.factor_names = {"shape", "scale", "pos_x", "pos_y"};
  d.factor_cardinalities = {2, 3, 8, 8};
  d.factor_values.assign(4, std::vector<int>());
  for (auto& col : d.factor_values) col.reserve(kMiniShapesCount);

  std::size_t row = 0;
  for (int shape = 0; shape < 2; ++shape)
    for (int scale = 0; scale < 3; ++scale)
      for (int ix = 0; ix < 8; ++ix)
        for (int iy = 0; iy < 8; ++iy) {
          // centers 4..11 keep the largest shape inside the frame
          rasterize(d.samples, row, shape, scales[scale], 4.0 + ix, 4.0 + iy);
          d.factor_values[0].push_back(shape);
          d.factor_values[1].push_back(scale);
          d.factor_values[2].push_back(ix);
          d.factor_values[3].push_back(iy);
          ++row;
        }
  return d;
}

Dataset generate_gauss_mixture(std::size_t k, std::size_t dim, std::size_t n,
                               std::uint64_t seed) {
  if (k < 1 || dim < 1 || n < 1)
    throw std::invalid_argument("generate_gauss_mixture: k, dim, n must be >= 1");
  Dataset d;
  d.name = "gauss_mixture";
  d.seed = seed;
  d.samples = Tensor2(n, dim);
  d.factor_names = {"component"};
  d.factor_cardinalities = {k};
  d.factor_values.assign(1, std::vector<int>(n, 0));

  // component means 10 sigma apart along rotating axes
  Tensor2 means(k, dim);
  for (std::size_t c = 0; c < k; ++c)
    means(c, c % dim) = 10.0 * static_cast<double>(1 + c / dim);

  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = static_cast<std::size_t>(rng.next_index(k));
    d.factor_values[0][i] = static_cast<int>(c);
    for (std::size_t j = 0; j < dim; ++j)
      d.samples(i, j) = means(c, j) + rng.next_normal();
  }
  return d;
}

namespace {

nlohmann::json factor_json(const Dataset& d) {
  nlohmann::json factors = nlohmann::json::array();
  for (std::size_t f = 0; f < d.factor_names.size(); ++f) {
    factors.push_back({{"name", d.factor_names[f]},
                       {"cardinality", d.factor_cardinalities[f]},
                       {"values", d.factor_values[f]}});
  }
  return factors;
}

void write_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& path) {
  nlohmann::json header;
  header["name"] = d.name;
  header["n"] = d.samples.rows;
  header["dim"] = d.samples.cols;
  header["seed"] = d.seed;
  header["factors"] = factor_json(d);
  const std::string htext = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_dataset: cannot open " + path);
  write_u32_le(os, static_cast<std::uint32_t>(htext.size()));
  os.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (double v : d.samples.data) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!os) throw std::runtime_error("save_dataset: write failed for " + path);

  std::ofstream sidecar(path + ".factors.json");
  sidecar << factor_json(d).dump(2) << "\n";
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
  unsigned char lb[4];
  is.read(reinterpret_cast<char*>(lb), 4);
  if (!is) throw std::runtime_error("load_dataset: truncated header");
  const std::uint32_t hlen = static_cast<std::uint32_t>(lb[0]) |
                             (static_cast<std::uint32_t>(lb[1]) << 8) |
                             (static_cast<std::uint32_t>(lb[2]) << 16) |
                             (static_cast<std::uint32_t>(lb[3]) << 24);
  std::string htext(hlen, '\0');
  is.read(htext.data(), hlen);
  if (!is) throw std::runtime_error("load_dataset: truncated header");
  const auto header = nlohmann::json::parse(htext);

  Dataset d;
  d.name = header.at("name");
  d.seed = header.at("seed");
  const std::size_t n = header.at("n");
  const std::size_t dim = header.at("dim");
  d.samples = Tensor2(n, dim);
  for (auto& v : d.samples.data) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("load_dataset: truncated payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    std::memcpy(&v, &bits, 8);
  }
  for (const auto& f : header.at("factors")) {
    d.factor_names.push_back(f.at("name"));
    d.factor_cardinalities.push_back(f.at("cardinality"));
    d.factor_values.push_back(f.at("values").get<std::vector<int>>());
  }
  return d;
}

}  // namespace cvae
