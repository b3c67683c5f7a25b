#include "cvae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace cvae {

namespace {

constexpr double kLogVarLo = -10.0;
constexpr double kLogVarHi = 10.0;
constexpr double kLog2Pi = 1.8378770664093454835606594728112353;
constexpr double kTcRidge = 1e-6;

double softplus(double x) {
  // log(1 + e^x), stable on both tails
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Cholesky factorization of a symmetric matrix stored dense row-major.
// Returns false if a pivot is not positive.
bool cholesky(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) return false;
    const double ljj = std::sqrt(d);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / ljj;
    }
  }
  return true;
}

// Inverse of SPD matrix from its Cholesky factor L (lower triangle of `l`).
std::vector<double> spd_inverse_from_cholesky(const std::vector<double>& l,
                                              std::size_t n) {
  std::vector<double> inv(n * n, 0.0);
  std::vector<double> col(n);
  for (std::size_t c = 0; c < n; ++c) {
    // solve L y = e_c
    for (std::size_t i = 0; i < n; ++i) {
      double s = (i == c) ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * col[k];
      col[i] = s / l[i * n + i];
    }
    // solve L^T x = y
    for (std::size_t ii = n; ii-- > 0;) {
      double s = col[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * inv[k * n + c];
      inv[ii * n + c] = s / l[ii * n + ii];
    }
  }
  return inv;
}

struct TcWork {
  TcEstimate estimate;
  std::vector<double> mean;      // column means of z
  std::vector<double> grad_mat;  // G = 0.5 * (diag(1/Sigma_jj) - Sigma^{-1})
};

TcWork tc_fit(const Tensor2& z) {
  const std::size_t n = z.rows, d = z.cols;
  if (n <= d + 1)
    throw std::invalid_argument(
        "total_correlation_gaussian: batch must exceed latent_dim + 1");

  TcWork w;
  w.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) w.mean[j] += z(i, j);
  for (auto& m : w.mean) m /= static_cast<double>(n);

  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double cj = z(i, j) - w.mean[j];
      for (std::size_t k = j; k < d; ++k)
        cov[j * d + k] += cj * (z(i, k) - w.mean[k]);
    }
  }
  const double scale = 1.0 / static_cast<double>(n - 1);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = j; k < d; ++k) {
      cov[j * d + k] *= scale;
      cov[k * d + j] = cov[j * d + k];
    }

  std::vector<double> chol = cov;
  if (!cholesky(chol, d)) {
    for (std::size_t j = 0; j < d; ++j) cov[j * d + j] += kTcRidge;
    chol = cov;
    w.estimate.ridged = true;
    if (!cholesky(chol, d))
      throw std::runtime_error(
          "total_correlation_gaussian: covariance singular even after ridge");
  }

  double log_det = 0.0;
  for (std::size_t j = 0; j < d; ++j) log_det += 2.0 * std::log(chol[j * d + j]);
  double sum_log_diag = 0.0;
  for (std::size_t j = 0; j < d; ++j) sum_log_diag += std::log(cov[j * d + j]);
  w.estimate.value = 0.5 * (sum_log_diag - log_det);

  const auto inv = spd_inverse_from_cholesky(chol, d);
  w.grad_mat.assign(d * d, 0.0);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = 0; k < d; ++k) {
      double g = -0.5 * inv[j * d + k];
      if (j == k) g += 0.5 / cov[j * d + j];
      w.grad_mat[j * d + k] = g;
    }
  return w;
}

}  // namespace

VaeModel VaeModel::build(const VaeSpec& spec, Rng& rng) {
  if (spec.input_dim == 0 || spec.latent_dim == 0)
    throw std::invalid_argument("VaeModel: dims must be positive");
  VaeModel m;
  m.spec = spec;
  std::size_t prev = spec.input_dim;
  for (std::size_t h : spec.encoder_hidden) {
    m.encoder.push_back(nn::DenseLayer::xavier(h, prev, spec.hidden_act, rng));
    prev = h;
  }
  m.encoder.push_back(nn::DenseLayer::xavier(2 * spec.latent_dim, prev,
                                             nn::Activation::identity, rng));
  prev = spec.latent_dim;
  for (std::size_t h : spec.decoder_hidden) {
    m.decoder.push_back(nn::DenseLayer::xavier(h, prev, spec.hidden_act, rng));
    prev = h;
  }
  m.decoder.push_back(nn::DenseLayer::xavier(spec.input_dim, prev,
                                             nn::Activation::identity, rng));
  return m;
}

LatentStats VaeModel::encode(const Tensor2& batch) {
  if (batch.cols != spec.input_dim)
    throw std::invalid_argument("VaeModel::encode: batch " + batch.shape_str() +
                                " vs input dim " + std::to_string(spec.input_dim));
  const Tensor2 out = nn::forward_chain(encoder, batch);
  const std::size_t n = batch.rows, d = spec.latent_dim;
  LatentStats stats{Tensor2(n, d), Tensor2(n, d)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      stats.mu(i, j) = out(i, j);
      stats.log_var(i, j) = std::clamp(out(i, j + d), kLogVarLo, kLogVarHi);
    }
  return stats;
}

Tensor2 VaeModel::decode(const Tensor2& z) {
  if (z.cols != spec.latent_dim)
    throw std::invalid_argument("VaeModel::decode: z " + z.shape_str() +
                                " vs latent dim " + std::to_string(spec.latent_dim));
  return nn::forward_chain(decoder, z);
}

std::vector<nn::ParamBlock> VaeModel::params() {
  auto blocks = nn::collect_params(encoder, "encoder");
  auto dec = nn::collect_params(decoder, "decoder");
  blocks.insert(blocks.end(), dec.begin(), dec.end());
  return blocks;
}

void VaeModel::zero_grad() {
  for (auto& l : encoder) l.zero_grad();
  for (auto& l : decoder) l.zero_grad();
}

namespace {

void write_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

constexpr std::uint32_t kVaeMagic = 0x45415643;  // "CVAE"

}  // namespace

void VaeModel::save(std::ostream& os) const {
  write_u32_le(os, kVaeMagic);
  write_u32_le(os, 1);  // version
  write_u32_le(os, static_cast<std::uint32_t>(spec.input_dim));
  write_u32_le(os, static_cast<std::uint32_t>(spec.latent_dim));
  write_u32_le(os, spec.likelihood == Likelihood::bernoulli ? 0u : 1u);
  write_u32_le(os, static_cast<std::uint32_t>(encoder.size()));
  write_u32_le(os, static_cast<std::uint32_t>(decoder.size()));
  std::vector<nn::DenseLayer> all;
  all.reserve(encoder.size() + decoder.size());
  for (const auto& l : encoder) all.push_back(l);
  for (const auto& l : decoder) all.push_back(l);
  nn::save_layers(os, all);
}

VaeModel VaeModel::load(std::istream& is) {
  if (read_u32_le(is) != kVaeMagic)
    throw std::runtime_error("not a VAE checkpoint (bad magic)");
  if (read_u32_le(is) != 1)
    throw std::runtime_error("unsupported VAE checkpoint version");
  VaeModel m;
  m.spec.input_dim = read_u32_le(is);
  m.spec.latent_dim = read_u32_le(is);
  m.spec.likelihood = read_u32_le(is) == 0 ? Likelihood::bernoulli : Likelihood::gaussian;
  const std::uint32_t n_enc = read_u32_le(is);
  const std::uint32_t n_dec = read_u32_le(is);
  auto all = nn::load_layers(is);
  if (all.size() != n_enc + n_dec)
    throw std::runtime_error("VAE checkpoint: layer count mismatch");
  m.encoder.assign(std::make_move_iterator(all.begin()),
                   std::make_move_iterator(all.begin() + n_enc));
  m.decoder.assign(std::make_move_iterator(all.begin() + n_enc),
                   std::make_move_iterator(all.end()));
  for (std::size_t i = 0; i + 1 < m.encoder.size(); ++i)
    m.spec.encoder_hidden.push_back(m.encoder[i].out_dim());
  for (std::size_t i = 0; i + 1 < m.decoder.size(); ++i)
    m.spec.decoder_hidden.push_back(m.decoder[i].out_dim());
  if (!m.encoder.empty())
    m.spec.hidden_act = m.encoder.size() > 1 ? m.encoder.front().act
                                             : nn::Activation::identity;
  return m;
}

std::vector<double> kl_per_sample(const LatentStats& stats) {
  const std::size_t n = stats.batch(), d = stats.dim();
  std::vector<double> kl(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    double mu_sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double mu = stats.mu(i, j);
      const double lv = stats.log_var(i, j);
      // mu^2 + sigma^2 - 1 - log sigma^2, with expm1 keeping the
      // sigma^2 - 1 - log sigma^2 >= 0 part accurate near lv = 0
      acc += mu * mu + (std::expm1(lv) - lv);
      mu_sq += mu * mu;
    }
    kl[i] = 0.5 * acc;
    if (kl[i] < 0.5 * mu_sq - 1e-9 * (1.0 + std::abs(kl[i])))
      throw std::logic_error("kl_per_sample: KL < 0.5*||mu||^2 (bug)");
  }
  return kl;
}

double kl_closed_form(const LatentStats& stats) {
  const auto per = kl_per_sample(stats);
  double sum = 0.0;
  for (double v : per) sum += v;
  return sum / static_cast<double>(per.size());
}

Tensor2 standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor2 eps(rows, cols);
  for (auto& v : eps.data) v = rng.next_normal();
  return eps;
}

Tensor2 apply_noise(const LatentStats& stats, const Tensor2& eps) {
  if (!eps.same_shape(stats.mu))
    throw std::invalid_argument("apply_noise: eps " + eps.shape_str() +
                                " vs mu " + stats.mu.shape_str());
  Tensor2 z(stats.batch(), stats.dim());
  for (std::size_t i = 0; i < z.size(); ++i)
    z.data[i] = stats.mu.data[i] +
                eps.data[i] * std::exp(0.5 * stats.log_var.data[i]);
  return z;
}

Tensor2 reparameterize(const LatentStats& stats, Rng& rng) {
  return apply_noise(stats, standard_normal(stats.batch(), stats.dim(), rng));
}

namespace {

// Mean log-likelihood and (optionally) d(mean ll)/d(decoder output).
double likelihood_score(Likelihood kind, const Tensor2& batch,
                        const Tensor2& out, Tensor2* dout) {
  const std::size_t n = batch.rows, p = batch.cols;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double x = batch(i, j);
      const double o = out(i, j);
      if (kind == Likelihood::bernoulli) {
        if (x < 0.0 || x > 1.0)
          throw std::invalid_argument(
              "reconstruction_loss: bernoulli target outside [0,1]");
        total += x * o - softplus(o);
        if (dout) (*dout)(i, j) = (x - stable_sigmoid(o)) * inv_n;
      } else {
        const double diff = x - o;
        total += -0.5 * diff * diff - 0.5 * kLog2Pi;
        if (dout) (*dout)(i, j) = diff * inv_n;
      }
    }
  }
  return total * inv_n;
}

}  // namespace

double reconstruction_loss(VaeModel& model, const Tensor2& batch,
                           const Tensor2& z) {
  const Tensor2 out = model.decode(z);
  require_shape(batch, out.rows, out.cols, "reconstruction_loss: batch");
  return likelihood_score(model.spec.likelihood, batch, out, nullptr);
}

TcEstimate total_correlation_gaussian(const Tensor2& z_batch) {
  return tc_fit(z_batch).estimate;
}

namespace {

enum class LossKind { control_kl, control_tc };

ElboBreakdown vae_loss(VaeModel& model, const Tensor2& batch, double beta,
                       const Tensor2& eps, LossKind kind, bool backprop) {
  const std::size_t n = batch.rows, d = model.spec.latent_dim;
  const double inv_n = 1.0 / static_cast<double>(n);
  require_shape(eps, n, d, "vae loss: noise");

  const LatentStats stats = model.encode(batch);
  const Tensor2& enc_out = model.encoder.back().preact_cache;

  Tensor2 sigma(n, d);
  for (std::size_t i = 0; i < sigma.size(); ++i)
    sigma.data[i] = std::exp(0.5 * stats.log_var.data[i]);

  Tensor2 z(n, d);
  for (std::size_t i = 0; i < z.size(); ++i)
    z.data[i] = stats.mu.data[i] + eps.data[i] * sigma.data[i];

  const Tensor2 dec_out = model.decode(z);

  ElboBreakdown b;
  b.beta = beta;
  Tensor2 drecon(n, batch.cols);
  b.recon = likelihood_score(model.spec.likelihood, batch, dec_out,
                             backprop ? &drecon : nullptr);
  b.kl = kl_closed_form(stats);
  b.elbo = b.recon - b.kl;

  TcWork tc_work;
  if (kind == LossKind::control_tc) {
    tc_work = tc_fit(z);
    b.tc = tc_work.estimate.value;
    b.tc_ridged = tc_work.estimate.ridged;
    b.weighted_loss = -(b.recon - b.kl - beta * b.tc);
  } else {
    b.weighted_loss = -(b.recon - beta * b.kl);
  }

  if (!backprop) return b;

  // d weighted_loss / d decoder output = -d recon
  for (auto& v : drecon.data) v = -v;
  const Tensor2 dz_recon = nn::backward_chain(model.decoder, drecon);

  // gradient w.r.t. z from the TC term: beta * 2/(n-1) * G (z_i - mean)
  Tensor2 dz = dz_recon;
  if (kind == LossKind::control_tc) {
    const double coeff = beta * 2.0 / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k)
          acc += tc_work.grad_mat[j * d + k] * (z(i, k) - tc_work.mean[k]);
        dz(i, j) += coeff * acc;
      }
  }

  // KL term weight: beta for KL control, 1 for TC control
  const double kl_w = (kind == LossKind::control_tc) ? 1.0 : beta;

  Tensor2 denc(n, 2 * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double mu = stats.mu(i, j);
      const double lv = stats.log_var(i, j);
      const double g_z = dz(i, j);
      double dmu = g_z + kl_w * mu * inv_n;
      double dlv = g_z * 0.5 * eps(i, j) * sigma(i, j) +
                   kl_w * 0.5 * std::expm1(lv) * inv_n;
      // clamp on log_var: zero gradient outside the active range
      const double raw = enc_out(i, j + d);
      if (raw <= kLogVarLo || raw >= kLogVarHi) dlv = 0.0;
      denc(i, j) = dmu;
      denc(i, j + d) = dlv;
    }
  nn::backward_chain(model.encoder, denc);
  return b;
}

}  // namespace

ElboBreakdown controlvae_loss(VaeModel& model, const Tensor2& batch, double beta,
                              const Tensor2& eps, bool backprop) {
  if (beta < 0.0)
    throw std::invalid_argument("controlvae_loss: beta must be >= 0");
  return vae_loss(model, batch, beta, eps, LossKind::control_kl, backprop);
}

ElboBreakdown kl_weighted_loss(VaeModel& model, const Tensor2& batch,
                               double weight, const Tensor2& eps, bool backprop) {
  if (!std::isfinite(weight))
    throw std::invalid_argument("kl_weighted_loss: non-finite weight");
  return vae_loss(model, batch, weight, eps, LossKind::control_kl, backprop);
}

ElboBreakdown controlvae_loss(VaeModel& model, const Tensor2& batch, double beta,
                              Rng& rng, bool backprop) {
  const Tensor2 eps = standard_normal(batch.rows, model.spec.latent_dim, rng);
  return controlvae_loss(model, batch, beta, eps, backprop);
}

ElboBreakdown control_factorvae_loss(VaeModel& model, const Tensor2& batch,
                                     double beta_tc, const Tensor2& eps,
                                     bool backprop) {
  if (beta_tc < 0.0)
    throw std::invalid_argument("control_factorvae_loss: beta_tc must be >= 0");
  return vae_loss(model, batch, beta_tc, eps, LossKind::control_tc, backprop);
}

ElboBreakdown control_factorvae_loss(VaeModel& model, const Tensor2& batch,
                                     double beta_tc, Rng& rng, bool backprop) {
  const Tensor2 eps = standard_normal(batch.rows, model.spec.latent_dim, rng);
  return control_factorvae_loss(model, batch, beta_tc, eps, backprop);
}

}  // namespace cvae
