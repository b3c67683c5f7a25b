#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cvae {

// One experiment per file, flat "key = value" lines, # comments. CLI flags
// override file keys. Every run must carry an explicit seed.
struct ExperimentConfig {
  std::string mode;  // controlvae | control_factorvae | plain_vae | beta_vae |
                     // lagrange | plant_only
  std::string dataset = "mini_shapes";  // mini_shapes | gauss_mixture
  std::string dataset_file;             // load this file instead of generating
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;

  long steps = 10000;
  std::size_t batch_size = 32;

  std::size_t latent_dim = 10;
  std::vector<std::size_t> enc_hidden = {64};
  std::vector<std::size_t> dec_hidden = {64};
  std::string likelihood;  // bernoulli | gaussian; default depends on dataset
  std::string hidden_act = "tanh";

  double lr = 1e-4;
  double adam_beta1 = 0.90;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-8;

  // controller
  double kp = 0.01;
  double ki = 1e-3;
  double beta_min = 0.0;
  double beta_max = 1.0;
  bool anti_windup = true;
  double set_point = 0.0;
  bool set_point_set = false;
  bool schedule = false;
  double schedule_start = 0.5;
  double schedule_target = 0.0;
  double schedule_step = 0.15;
  long schedule_interval = 5000;
  double beta = 1.0;    // fixed weight for beta_vae
  double alpha = 1e-3;  // lagrange learning rate
  double kl_ema = 0.0;  // 0 disables smoothing of the feedback signal

  // gauss_mixture parameters
  std::size_t gm_k = 4;
  std::size_t gm_dim = 8;
  std::size_t gm_n = 4096;

  // surrogate plant parameters
  double plant_a = 40.0;
  double plant_c = 3.0;
  double plant_eta = 0.05;
  double plant_noise = 0.0;
  double plant_kl0 = 0.0;

  // reference-KL convergence rule
  long ref_window = 500;
  double ref_tol = 1e-4;

  // reporting
  double band_pct = 5.0;
  double window_pct = 10.0;
  bool compute_mig = true;
  bool save_checkpoint = true;
  bool save_dataset_file = false;

  void validate() const;
  double set_point_at(long t) const;  // schedule-aware
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

}  // namespace cvae
