#include "cvae/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cvae/controller.hpp"
#include "cvae/plant.hpp"
#include "cvae/rng.hpp"
#include "cvae/schedule.hpp"

namespace cvae {

namespace {

namespace fs = std::filesystem;

Controller make_controller(const ExperimentConfig& cfg) {
  if (cfg.mode == "controlvae" || cfg.mode == "control_factorvae" ||
      cfg.mode == "plant_only") {
    PiController pi(cfg.kp, cfg.ki, cfg.beta_min, cfg.beta_max);
    pi.set_anti_windup(cfg.anti_windup);
    return pi;
  }
  if (cfg.mode == "lagrange") return LagrangeController(cfg.alpha);
  if (cfg.mode == "plain_vae") return FixedBetaController(1.0);
  if (cfg.mode == "beta_vae") return FixedBetaController(cfg.beta);
  throw std::invalid_argument("make_controller: unknown mode " + cfg.mode);
}

Likelihood likelihood_for(const ExperimentConfig& cfg, const Dataset& data) {
  if (cfg.likelihood == "bernoulli") return Likelihood::bernoulli;
  if (cfg.likelihood == "gaussian") return Likelihood::gaussian;
  if (!cfg.likelihood.empty())
    throw std::invalid_argument("config: unknown likelihood " + cfg.likelihood);
  return data.name == "gauss_mixture" ? Likelihood::gaussian
                                      : Likelihood::bernoulli;
}

VaeModel build_model(const ExperimentConfig& cfg, const Dataset& data,
                     Likelihood lik, Rng& rng) {
  VaeSpec spec;
  spec.input_dim = data.dim();
  spec.latent_dim = cfg.latent_dim;
  spec.encoder_hidden = cfg.enc_hidden;
  spec.decoder_hidden = cfg.dec_hidden;
  spec.likelihood = lik;
  spec.hidden_act = nn::activation_from_name(cfg.hidden_act);
  return VaeModel::build(spec, rng);
}

Tensor2 gather_batch(const Dataset& data, std::size_t batch_size, Rng& rng) {
  Tensor2 batch(batch_size, data.dim());
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::size_t row = rng.next_index(data.size());
    const double* src = data.samples.row_ptr(row);
    double* dst = batch.row_ptr(b);
    std::copy(src, src + data.dim(), dst);
  }
  return batch;
}

double tail_mean(const std::vector<double>& v, double window_pct) {
  if (v.empty()) return 0.0;
  std::size_t window =
      static_cast<std::size_t>(std::ceil(v.size() * window_pct / 100.0));
  window = std::clamp<std::size_t>(window, 1, v.size());
  double acc = 0.0;
  for (std::size_t i = v.size() - window; i < v.size(); ++i) acc += v[i];
  return acc / static_cast<double>(window);
}

void write_summary_json(const ExperimentConfig& cfg, const RunSummary& s) {
  nlohmann::json j;
  j["mode"] = cfg.mode;
  j["seed"] = cfg.seed;
  j["steps"] = cfg.steps;
  j["ok"] = s.ok;
  if (!s.ok) {
    j["abort_reason"] = s.abort_reason;
    j["abort_step"] = s.abort_step;
  }
  j["final_kl"] = s.final_kl;
  j["final_tc"] = s.final_tc;
  j["final_elbo"] = s.final_elbo;
  j["final_set_point"] = s.final_set_point;
  j["mean_beta_tail"] = s.mean_beta_tail;
  j["mean_kl_tail"] = s.mean_kl_tail;
  j["mean_tc_tail"] = s.mean_tc_tail;
  j["mean_elbo_tail"] = s.mean_elbo_tail;
  j["control_stats"] = {{"settled", s.control_stats.settled},
                        {"settling_time", s.control_stats.settling_time},
                        {"overshoot", s.control_stats.overshoot},
                        {"steady_state_error", s.control_stats.steady_state_error}};
  if (s.mig_report)
    j["mig"] = nlohmann::json::parse(s.mig_report->to_json());
  j["trace"] = s.trace_path;
  if (!s.checkpoint_path.empty()) j["checkpoint"] = s.checkpoint_path;
  if (!s.dataset_path.empty()) j["dataset"] = s.dataset_path;
  j["wall_seconds"] = s.wall_seconds;

  std::ofstream os(s.summary_path);
  if (!os) throw std::runtime_error("cannot write summary " + s.summary_path);
  os << j.dump(2) << "\n";
}

RunSummary run_plant_only(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunSummary s;
  FirstOrderPlant plant({cfg.plant_a, cfg.plant_c, cfg.plant_eta,
                         cfg.plant_noise, cfg.plant_kl0, cfg.seed});
  Controller controller = make_controller(cfg);

  std::vector<double> sps(static_cast<std::size_t>(cfg.steps));
  for (long t = 1; t <= cfg.steps; ++t)
    sps[static_cast<std::size_t>(t - 1)] = cfg.set_point_at(t);
  const auto loop = closed_loop(plant, controller, sps);

  s.trace.reserve(loop.size());
  std::vector<double> kls, betas;
  for (const auto& p : loop) {
    TraceRecord r;
    r.step = p.step;
    r.kl = p.kl;
    r.beta = p.beta;
    r.set_point = p.set_point;
    s.trace.push_back(r);
    kls.push_back(p.kl);
    betas.push_back(p.beta);
  }
  s.ok = true;
  s.final_kl = kls.back();
  s.final_set_point = sps.back();
  s.mean_kl_tail = tail_mean(kls, cfg.window_pct);
  s.mean_beta_tail = tail_mean(betas, cfg.window_pct);
  s.control_stats = trace_stats(kls, sps.back(), cfg.band_pct, cfg.window_pct);

  fs::create_directories(cfg.out_dir);
  s.trace_path = (fs::path(cfg.out_dir) / "trace.csv").string();
  s.summary_path = (fs::path(cfg.out_dir) / "summary.json").string();
  write_trace_csv(s.trace_path, s.trace);
  s.wall_seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0).count();
  write_summary_json(cfg, s);
  return s;
}

}  // namespace

Dataset dataset_for_config(const ExperimentConfig& cfg) {
  if (!cfg.dataset_file.empty()) return load_dataset(cfg.dataset_file);
  if (cfg.dataset == "mini_shapes") return generate_mini_shapes();
  if (cfg.dataset == "gauss_mixture")
    return generate_gauss_mixture(cfg.gm_k, cfg.gm_dim, cfg.gm_n, cfg.seed);
  throw std::invalid_argument("unknown dataset: " + cfg.dataset);
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.mode == "plant_only") return run_plant_only(cfg);

  const auto t0 = std::chrono::steady_clock::now();
  RunSummary s;
  fs::create_directories(cfg.out_dir);
  s.trace_path = (fs::path(cfg.out_dir) / "trace.csv").string();
  s.summary_path = (fs::path(cfg.out_dir) / "summary.json").string();

  const Dataset data = dataset_for_config(cfg);
  const Likelihood lik = likelihood_for(cfg, data);
  const bool factor_mode = cfg.mode == "control_factorvae";

  Rng rng(cfg.seed);
  VaeModel model = build_model(cfg, data, lik, rng);
  nn::AdamOptimizer opt(model.params(),
                        {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
  Controller controller = make_controller(cfg);

  double weight = controller_initial_output(controller);
  double ema = 0.0;
  bool ema_started = false;
  std::vector<double> kls, tcs, betas, elbos;

  auto abort_run = [&](long step, const std::string& reason, double kl_now) {
    s.ok = false;
    s.abort_step = step;
    s.abort_reason = reason + " (beta=" + std::to_string(weight) +
                     ", kl=" + std::to_string(kl_now) +
                     ", step=" + std::to_string(step) + ")";
    write_trace_csv(s.trace_path, s.trace);
    if (!kls.empty()) {
      s.final_kl = kls.back();
      s.control_stats =
          trace_stats(factor_mode ? tcs : kls, cfg.set_point_at(step),
                      cfg.band_pct, cfg.window_pct);
    }
    s.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0).count();
    write_summary_json(cfg, s);
    return s;
  };

  for (long t = 1; t <= cfg.steps; ++t) {
    const Tensor2 batch = gather_batch(data, cfg.batch_size, rng);
    const Tensor2 eps = standard_normal(cfg.batch_size, cfg.latent_dim, rng);
    model.zero_grad();

    ElboBreakdown b;
    try {
      b = factor_mode
              ? control_factorvae_loss(model, batch, std::max(weight, 0.0), eps, true)
              : kl_weighted_loss(model, batch, weight, eps, true);
    } catch (const std::exception& e) {
      return abort_run(t, std::string("loss failed: ") + e.what(), 0.0);
    }
    if (!std::isfinite(b.weighted_loss))
      return abort_run(t, "non-finite loss", b.kl);

    try {
      opt.step();
    } catch (const std::exception& e) {
      return abort_run(t, e.what(), b.kl);
    }

    const double measured = factor_mode ? b.tc : b.kl;
    if (!std::isfinite(measured))
      return abort_run(t, "non-finite feedback", b.kl);

    double feedback = measured;
    if (cfg.kl_ema > 0.0) {
      ema = ema_started ? cfg.kl_ema * ema + (1.0 - cfg.kl_ema) * measured
                        : measured;
      ema_started = true;
      feedback = ema;
    }

    const double sp = cfg.set_point_at(t);
    TraceRecord r;
    r.step = t;
    r.kl = b.kl;
    if (factor_mode) r.tc = b.tc;
    r.beta = weight;
    r.recon = b.recon;
    r.elbo = b.elbo;
    r.set_point = sp;
    s.trace.push_back(r);
    kls.push_back(b.kl);
    if (factor_mode) tcs.push_back(b.tc);
    betas.push_back(weight);
    elbos.push_back(b.elbo);

    weight = controller_step(controller, ControlError(sp - feedback, t));
  }

  s.ok = true;
  s.final_kl = kls.back();
  s.final_tc = factor_mode ? tcs.back() : 0.0;
  s.final_elbo = elbos.back();
  s.final_set_point = cfg.set_point_at(cfg.steps);
  s.mean_beta_tail = tail_mean(betas, cfg.window_pct);
  s.mean_kl_tail = tail_mean(kls, cfg.window_pct);
  s.mean_tc_tail = factor_mode ? tail_mean(tcs, cfg.window_pct) : 0.0;
  s.mean_elbo_tail = tail_mean(elbos, cfg.window_pct);
  s.control_stats = trace_stats(factor_mode ? tcs : kls, s.final_set_point,
                                cfg.band_pct, cfg.window_pct);

  write_trace_csv(s.trace_path, s.trace);

  if (cfg.save_checkpoint) {
    s.checkpoint_path = (fs::path(cfg.out_dir) / "model.bin").string();
    std::ofstream os(s.checkpoint_path, std::ios::binary);
    model.save(os);
  }
  if (cfg.save_dataset_file) {
    s.dataset_path = (fs::path(cfg.out_dir) / "dataset.bin").string();
    save_dataset(data, s.dataset_path);
  }

  if (cfg.compute_mig && !data.factor_names.empty() && cfg.latent_dim >= 2) {
    const LatentStats stats = model.encode(data.samples);
    s.mig_report = mig(stats.mu, data.factor_names, data.factor_values);
  }

  s.wall_seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0).count();
  write_summary_json(cfg, s);
  return s;
}

ReferenceKl measure_reference_kl(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dataset data = dataset_for_config(cfg);
  const Likelihood lik = likelihood_for(cfg, data);

  Rng rng(cfg.seed);
  VaeModel model = build_model(cfg, data, lik, rng);
  nn::AdamOptimizer opt(model.params(),
                        {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});

  ReferenceKl out;
  double prev_window_elbo = 0.0;
  bool have_prev = false;
  double acc_elbo = 0.0, acc_kl = 0.0;
  long in_window = 0;

  for (long t = 1; t <= cfg.steps; ++t) {
    const Tensor2 batch = gather_batch(data, cfg.batch_size, rng);
    const Tensor2 eps = standard_normal(cfg.batch_size, cfg.latent_dim, rng);
    model.zero_grad();
    const ElboBreakdown b = controlvae_loss(model, batch, 1.0, eps, true);
    if (!std::isfinite(b.weighted_loss))
      throw std::runtime_error("measure_reference_kl: non-finite loss at step " +
                               std::to_string(t));
    opt.step();
    acc_elbo += b.elbo;
    acc_kl += b.kl;
    ++in_window;
    out.steps_used = t;

    if (in_window == cfg.ref_window) {
      const double window_elbo = acc_elbo / static_cast<double>(in_window);
      out.kl_vae = acc_kl / static_cast<double>(in_window);
      out.window_elbo = window_elbo;
      if (have_prev) {
        const double rel = std::abs(window_elbo - prev_window_elbo) /
                           std::max(1.0, std::abs(prev_window_elbo));
        if (rel < cfg.ref_tol) {
          out.converged = true;
          return out;
        }
      }
      prev_window_elbo = window_elbo;
      have_prev = true;
      acc_elbo = acc_kl = 0.0;
      in_window = 0;
    }
  }
  if (in_window > 0) {
    out.kl_vae = acc_kl / static_cast<double>(in_window);
    out.window_elbo = acc_elbo / static_cast<double>(in_window);
  }
  return out;  // converged stays false: best estimate with warning flag
}

}  // namespace cvae
