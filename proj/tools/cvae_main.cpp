#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvae/config.hpp"
#include "cvae/data.hpp"
#include "cvae/harness.hpp"
#include "cvae/kernels.hpp"
#include "cvae/metrics.hpp"
#include "cvae/plot.hpp"
#include "cvae/schedule.hpp"
#include "cvae/vae.hpp"

namespace {

cvae::ExperimentConfig load_config(const std::string& path,
                                   const std::vector<std::string>& overrides) {
  auto cfg = cvae::parse_config_file(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got: " + kv);
    cvae::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

int report_run(const cvae::RunSummary& s) {
  if (!s.ok) {
    std::cerr << "run aborted at step " << s.abort_step << ": "
              << s.abort_reason << "\n";
    std::cerr << "partial trace: " << s.trace_path << "\n";
    return 1;
  }
  std::cout << "trace:      " << s.trace_path << "\n"
            << "summary:    " << s.summary_path << "\n";
  if (!s.checkpoint_path.empty())
    std::cout << "checkpoint: " << s.checkpoint_path << "\n";
  std::printf("final kl %.4f | tail kl %.4f | tail beta %.4f | set point %.4f\n",
              s.final_kl, s.mean_kl_tail, s.mean_beta_tail, s.final_set_point);
  if (s.mig_report)
    std::printf("mig overall %.4f\n", s.mig_report->overall);
  std::printf("wall %.2fs\n", s.wall_seconds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feedback-controlled VAE training laboratory"};
  app.require_subcommand(1);

  bool serial = false;
  app.add_flag("--serial", serial, "disable OpenMP kernels");

  std::string config_path;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--set", overrides, "override config keys (key=value)");

  auto* ref = app.add_subcommand(
      "reference-kl", "train a plain VAE and report its converged KL");
  ref->add_option("config", config_path, "config file")->required();
  ref->add_option("--set", overrides, "override config keys (key=value)");

  double kl_vae = 0.0;
  auto* advise = app.add_subcommand(
      "advise", "set-point range for a measured plain-VAE KL");
  advise->add_option("kl_vae", kl_vae, "reference KL in nats")->required();

  auto* plant = app.add_subcommand(
      "plant-demo", "closed loop on the surrogate plant (no training)");
  plant->add_option("config", config_path, "config file")->required();
  plant->add_option("--set", overrides, "override config keys (key=value)");

  std::string checkpoint_path, dataset_path;
  std::size_t bins = 20;
  auto* mig_cmd = app.add_subcommand(
      "mig", "mutual information gap of a checkpoint on a dataset");
  mig_cmd->add_option("checkpoint", checkpoint_path, "model checkpoint")->required();
  mig_cmd->add_option("dataset", dataset_path, "dataset file")->required();
  mig_cmd->add_option("--bins", bins, "histogram bins (default 20)");

  std::vector<std::string> trace_paths;
  std::string plot_out = "plots";
  auto* plot = app.add_subcommand("plot", "render SVG panels from trace CSVs");
  plot->add_option("traces", trace_paths, "trace CSV files")->required();
  plot->add_option("-o,--out", plot_out, "output directory");

  CLI11_PARSE(app, argc, argv);
  cvae::kernels::set_parallel(!serial);

  try {
    if (run->parsed()) {
      return report_run(cvae::run_experiment(load_config(config_path, overrides)));
    }
    if (ref->parsed()) {
      auto cfg = load_config(config_path, overrides);
      cfg.mode = "plain_vae";
      const auto r = cvae::measure_reference_kl(cfg);
      const auto advice = cvae::advise_set_point(r.kl_vae);
      nlohmann::json j;
      j["kl_vae"] = r.kl_vae;
      j["converged"] = r.converged;
      j["steps_used"] = r.steps_used;
      j["window_elbo"] = r.window_elbo;
      j["d_max"] = advice.d_max;
      j["recommended_range"] = {advice.range_lo, advice.range_hi};
      if (!r.converged)
        j["warning"] = "did not meet the convergence rule; KL is a best estimate";
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (advise->parsed()) {
      const auto a = cvae::advise_set_point(kl_vae);
      nlohmann::json j;
      j["kl_vae"] = a.kl_vae;
      j["d_max"] = a.d_max;
      j["recommended_range"] = {a.range_lo, a.range_hi};
      j["reconstruction_gap_bound_at_d_max"] =
          cvae::reconstruction_gap_bound(a.kl_vae, a.d_max);
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (plant->parsed()) {
      auto cfg = load_config(config_path, overrides);
      cfg.mode = "plant_only";
      return report_run(cvae::run_experiment(cfg));
    }
    if (mig_cmd->parsed()) {
      std::ifstream is(checkpoint_path, std::ios::binary);
      if (!is) throw std::runtime_error("cannot open " + checkpoint_path);
      auto model = cvae::VaeModel::load(is);
      const auto data = cvae::load_dataset(dataset_path);
      if (data.factor_names.empty())
        throw std::runtime_error("dataset has no factor labels");
      const auto stats = model.encode(data.samples);
      const auto report =
          cvae::mig(stats.mu, data.factor_names, data.factor_values, bins);
      std::cout << report.to_json() << "\n";
      return 0;
    }
    if (plot->parsed()) {
      const auto files = cvae::emit_plots(trace_paths, plot_out);
      for (const auto& f : files) std::cout << f << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
