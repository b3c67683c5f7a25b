#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cvae/rng.hpp"
#include "cvae/tensor.hpp"

namespace cvae::nn {

enum class Activation { identity, relu, tanh_act, sigmoid };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fully connected layer with explicit gradient buffers. forward() caches the
// input and pre-activation so a single backward() can follow; training is
// strictly forward-then-backward per batch.
struct DenseLayer {
  Tensor2 weight;             // out x in
  std::vector<double> bias;   // out
  Tensor2 grad_weight;
  std::vector<double> grad_bias;
  Activation act = Activation::identity;

  Tensor2 input_cache;
  Tensor2 preact_cache;
  bool has_cache = false;

  DenseLayer() = default;
  DenseLayer(std::size_t out, std::size_t in, Activation a);

  // Xavier-uniform weights, zero bias; draw order is row-major and fixed.
  static DenseLayer xavier(std::size_t out, std::size_t in, Activation a,
                           Rng& rng);

  std::size_t in_dim() const { return weight.cols; }
  std::size_t out_dim() const { return weight.rows; }

  Tensor2 forward(const Tensor2& input);
  // Accumulates into grad_weight/grad_bias and returns the input gradient.
  Tensor2 backward(const Tensor2& upstream);
  void zero_grad();
};

Tensor2 forward_chain(std::vector<DenseLayer>& layers, const Tensor2& input);
Tensor2 backward_chain(std::vector<DenseLayer>& layers, const Tensor2& upstream);

// Named view over a flat parameter block and its gradient.
struct ParamBlock {
  std::string name;
  double* value;
  double* grad;
  std::size_t size;
};

std::vector<ParamBlock> collect_params(std::vector<DenseLayer>& layers,
                                       const std::string& prefix);

struct AdamParams {
  double lr = 1e-4;
  double beta1 = 0.90;
  double beta2 = 0.99;
  double eps = 1e-8;
};

// Standard Adam with bias correction over a set of parameter blocks.
// Rejects non-finite gradients: those mean the training run diverged.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<ParamBlock> params, AdamParams hp);

  void step();
  long step_count() const { return t_; }

 private:
  std::vector<ParamBlock> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamParams hp_;
  long t_ = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  GradCheckEntry worst;
  std::size_t checked = 0;
};

// Central-difference check of every parameter. `loss` must be a pure
// re-evaluation of the objective at the current parameters; `fill_grads`
// zeroes the gradient buffers and runs one backward pass. Relative error
// uses max(|analytic|, |numeric|, 1e-3) as the denominator; the floor keeps
// finite-difference noise on near-zero gradients from dominating the report.
GradCheckReport grad_check(const std::vector<ParamBlock>& params,
                           const std::function<double()>& loss,
                           const std::function<void()>& fill_grads,
                           double h = 1e-6);

// Flat binary model format: "CVNN" magic, u32 version, u32 layer count, then
// per layer u32 out, u32 in, u32 activation, f64 weights (row-major), f64
// bias. All integers and doubles little-endian.
void save_layers(std::ostream& os, const std::vector<DenseLayer>& layers);
std::vector<DenseLayer> load_layers(std::istream& is);

}  // namespace cvae::nn
