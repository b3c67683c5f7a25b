#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "cvae/nn.hpp"
#include "cvae/rng.hpp"
#include "cvae/tensor.hpp"

namespace cvae {

enum class Likelihood { bernoulli, gaussian };

// Per-batch posterior parameters. log_var arrives already clamped to
// [-10, 10] so sigma stays in [e^-5, e^5].
struct LatentStats {
  Tensor2 mu;       // batch x dim
  Tensor2 log_var;  // batch x dim

  std::size_t batch() const { return mu.rows; }
  std::size_t dim() const { return mu.cols; }
};

struct ElboBreakdown {
  double recon = 0.0;          // E[log p(x|z)], batch mean, nats
  double kl = 0.0;             // closed-form KL to the unit prior, batch mean
  double tc = 0.0;             // Gaussian total correlation of the z batch
  double beta = 0.0;           // weight applied this step
  double elbo = 0.0;           // recon - kl
  double weighted_loss = 0.0;  // scalar actually minimized
  bool tc_ridged = false;
};

struct VaeSpec {
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;
  std::vector<std::size_t> encoder_hidden;
  std::vector<std::size_t> decoder_hidden;
  Likelihood likelihood = Likelihood::bernoulli;
  nn::Activation hidden_act = nn::Activation::tanh_act;
};

// Dense encoder/decoder pair. The encoder's last layer emits 2*latent_dim
// values (mu then log sigma^2) with identity activation; the decoder's last
// layer emits input_dim logits (bernoulli) or means (gaussian, variance 1).
struct VaeModel {
  VaeSpec spec;
  std::vector<nn::DenseLayer> encoder;
  std::vector<nn::DenseLayer> decoder;

  static VaeModel build(const VaeSpec& spec, Rng& rng);

  LatentStats encode(const Tensor2& batch);
  Tensor2 decode(const Tensor2& z);

  std::vector<nn::ParamBlock> params();
  void zero_grad();

  void save(std::ostream& os) const;
  static VaeModel load(std::istream& is);
};

// Batch-mean closed-form KL(q(z|x) || N(0, I)).
double kl_closed_form(const LatentStats& stats);
// Per-sample values; enforces kl_i >= 0.5 * ||mu_i||^2 up to rounding and
// throws if the inequality is violated (it cannot be, short of a bug).
std::vector<double> kl_per_sample(const LatentStats& stats);

Tensor2 standard_normal(std::size_t rows, std::size_t cols, Rng& rng);
// z = mu + eps * exp(0.5 * log_var) with caller-supplied noise
Tensor2 apply_noise(const LatentStats& stats, const Tensor2& eps);
Tensor2 reparameterize(const LatentStats& stats, Rng& rng);

// Mean log-likelihood per sample of `batch` under the decoder output for z.
double reconstruction_loss(VaeModel& model, const Tensor2& batch,
                           const Tensor2& z);

struct TcEstimate {
  double value = 0.0;
  bool ridged = false;
};

// Fits a full-covariance Gaussian to the z batch and returns
// 0.5 * (sum_j log Sigma_jj - log det Sigma). Requires batch > dim + 1;
// a singular covariance is ridged with 1e-6 on the diagonal and flagged.
TcEstimate total_correlation_gaussian(const Tensor2& z_batch);

// Objective: weighted_loss = -(recon - beta * kl). With backprop=true the
// parameter gradients are accumulated into the model's gradient buffers.
ElboBreakdown controlvae_loss(VaeModel& model, const Tensor2& batch,
                              double beta, const Tensor2& eps, bool backprop);
// Same objective without the beta >= 0 requirement; the Lagrange-multiplier
// baseline applies its multiplier as the KL weight and may drive it negative.
ElboBreakdown kl_weighted_loss(VaeModel& model, const Tensor2& batch,
                               double weight, const Tensor2& eps, bool backprop);
ElboBreakdown controlvae_loss(VaeModel& model, const Tensor2& batch,
                              double beta, Rng& rng, bool backprop = true);

// Objective: weighted_loss = -(recon - kl - beta_tc * tc). The returned tc
// is the value fed back to the TC controller.
ElboBreakdown control_factorvae_loss(VaeModel& model, const Tensor2& batch,
                                     double beta_tc, const Tensor2& eps,
                                     bool backprop);
ElboBreakdown control_factorvae_loss(VaeModel& model, const Tensor2& batch,
                                     double beta_tc, Rng& rng,
                                     bool backprop = true);

}  // namespace cvae
