#include "cvae/nn.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "cvae/kernels.hpp"

namespace cvae::nn {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh_act: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh_act;
  if (name == "sigmoid") return Activation::sigmoid;
  throw std::invalid_argument("unknown activation: " + name);
}

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double apply_act(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh_act: return std::tanh(x);
    case Activation::sigmoid: return stable_sigmoid(x);
  }
  return x;
}

double act_derivative(Activation a, double preact) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return preact > 0.0 ? 1.0 : 0.0;
    case Activation::tanh_act: {
      const double t = std::tanh(preact);
      return 1.0 - t * t;
    }
    case Activation::sigmoid: {
      const double s = stable_sigmoid(preact);
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

}  // namespace

DenseLayer::DenseLayer(std::size_t out, std::size_t in, Activation a)
    : weight(out, in),
      bias(out, 0.0),
      grad_weight(out, in),
      grad_bias(out, 0.0),
      act(a) {}

DenseLayer DenseLayer::xavier(std::size_t out, std::size_t in, Activation a,
                              Rng& rng) {
  DenseLayer layer(out, in, a);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (auto& w : layer.weight.data) w = rng.next_uniform(-limit, limit);
  return layer;
}

Tensor2 DenseLayer::forward(const Tensor2& input) {
  if (input.cols != weight.cols) {
    throw std::invalid_argument("DenseLayer::forward: input " +
                                input.shape_str() + " incompatible with weight " +
                                weight.shape_str());
  }
  input_cache = input;
  preact_cache = Tensor2(input.rows, weight.rows);
  kernels::affine_forward(input, weight, bias, preact_cache);
  has_cache = true;
  if (act == Activation::identity) return preact_cache;
  Tensor2 out = preact_cache;
  for (auto& v : out.data) v = apply_act(act, v);
  return out;
}

Tensor2 DenseLayer::backward(const Tensor2& upstream) {
  if (!has_cache)
    throw std::logic_error("DenseLayer::backward called before forward");
  if (!upstream.same_shape(preact_cache)) {
    throw std::invalid_argument("DenseLayer::backward: upstream " +
                                upstream.shape_str() + " vs activations " +
                                preact_cache.shape_str());
  }
  Tensor2 dpre = upstream;
  if (act != Activation::identity) {
    for (std::size_t i = 0; i < dpre.size(); ++i)
      dpre.data[i] *= act_derivative(act, preact_cache.data[i]);
  }
  kernels::affine_backward_params(dpre, input_cache, grad_weight, grad_bias);
  Tensor2 dinput(input_cache.rows, input_cache.cols);
  kernels::affine_backward_input(dpre, weight, dinput);
  return dinput;
}

void DenseLayer::zero_grad() {
  grad_weight.fill(0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

Tensor2 forward_chain(std::vector<DenseLayer>& layers, const Tensor2& input) {
  Tensor2 h = input;
  for (auto& layer : layers) h = layer.forward(h);
  return h;
}

Tensor2 backward_chain(std::vector<DenseLayer>& layers, const Tensor2& upstream) {
  Tensor2 g = upstream;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) g = it->backward(g);
  return g;
}

std::vector<ParamBlock> collect_params(std::vector<DenseLayer>& layers,
                                       const std::string& prefix) {
  std::vector<ParamBlock> blocks;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    blocks.push_back({prefix + "[" + std::to_string(i) + "].weight",
                      l.weight.data.data(), l.grad_weight.data.data(),
                      l.weight.size()});
    blocks.push_back({prefix + "[" + std::to_string(i) + "].bias",
                      l.bias.data(), l.grad_bias.data(), l.bias.size()});
  }
  return blocks;
}

AdamOptimizer::AdamOptimizer(std::vector<ParamBlock> params, AdamParams hp)
    : params_(std::move(params)), hp_(hp) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.size, 0.0);
    v_.emplace_back(p.size, 0.0);
  }
}

void AdamOptimizer::step() {
  for (const auto& p : params_) {
    for (std::size_t i = 0; i < p.size; ++i) {
      if (!std::isfinite(p.grad[i]))
        throw std::runtime_error("AdamOptimizer: non-finite gradient in " +
                                 p.name + " (diverged training)");
    }
  }
  ++t_;
  for (std::size_t b = 0; b < params_.size(); ++b) {
    const auto& p = params_[b];
    kernels::adam_update(p.value, p.grad, m_[b].data(), v_[b].data(), p.size,
                         {hp_.lr, hp_.beta1, hp_.beta2, hp_.eps, t_});
  }
}

GradCheckReport grad_check(const std::vector<ParamBlock>& params,
                           const std::function<double()>& loss,
                           const std::function<void()>& fill_grads,
                           double h) {
  fill_grads();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params)
    analytic.emplace_back(p.grad, p.grad + p.size);

  GradCheckReport report;
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto& p = params[b];
    for (std::size_t i = 0; i < p.size; ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = loss();
      p.value[i] = saved - h;
      const double down = loss();
      p.value[i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[b][i];
      // the floor absorbs central-difference noise (~|loss| * eps / h) on
      // near-zero gradients, where a pure ratio is meaningless
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = {p.name, i, a, numeric, rel};
      }
    }
  }
  return report;
}

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("model file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64s(std::ostream& os, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], 8);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
  }
}

void read_f64s(std::istream& is, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("model file truncated");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    std::memcpy(&data[i], &bits, 8);
  }
}

constexpr std::uint32_t kMagic = 0x4e4e5643;  // "CVNN"
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_layers(std::ostream& os, const std::vector<DenseLayer>& layers) {
  write_u32(os, kMagic);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    write_u32(os, static_cast<std::uint32_t>(l.out_dim()));
    write_u32(os, static_cast<std::uint32_t>(l.in_dim()));
    write_u32(os, static_cast<std::uint32_t>(l.act));
    write_f64s(os, l.weight.data.data(), l.weight.size());
    write_f64s(os, l.bias.data(), l.bias.size());
  }
}

std::vector<DenseLayer> load_layers(std::istream& is) {
  if (read_u32(is) != kMagic)
    throw std::runtime_error("not a model file (bad magic)");
  if (read_u32(is) != kVersion)
    throw std::runtime_error("unsupported model file version");
  const std::uint32_t count = read_u32(is);
  std::vector<DenseLayer> layers;
  layers.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t out = read_u32(is);
    const std::uint32_t in = read_u32(is);
    const std::uint32_t act = read_u32(is);
    if (act > 3) throw std::runtime_error("model file: bad activation code");
    DenseLayer l(out, in, static_cast<Activation>(act));
    read_f64s(is, l.weight.data.data(), l.weight.size());
    read_f64s(is, l.bias.data(), l.bias.size());
    layers.push_back(std::move(l));
  }
  return layers;
}

}  // namespace cvae::nn
