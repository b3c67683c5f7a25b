#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cvae/config.hpp"
#include "cvae/data.hpp"
#include "cvae/metrics.hpp"
#include "cvae/trace.hpp"
#include "cvae/vae.hpp"

namespace cvae {

struct RunSummary {
  bool ok = false;
  std::string abort_reason;
  long abort_step = -1;

  double final_kl = 0.0;
  double final_tc = 0.0;
  double mean_beta_tail = 0.0;  // mean beta over the last window_pct of steps
  double mean_kl_tail = 0.0;
  double mean_tc_tail = 0.0;
  double final_elbo = 0.0;
  double mean_elbo_tail = 0.0;
  double final_set_point = 0.0;
  // settling/overshoot/steady-state error of the controlled series (KL in
  // the KL modes and the plant, TC in control_factorvae)
  TraceStats control_stats;
  std::optional<MigReport> mig_report;

  std::string trace_path;
  std::string summary_path;
  std::string checkpoint_path;
  std::string dataset_path;
  double wall_seconds = 0.0;

  std::vector<TraceRecord> trace;  // in-memory copy for callers
};

// Runs one experiment: wires dataset -> model -> loss -> optimizer ->
// controller, writes the trace CSV, a JSON summary, and (for training modes)
// a model checkpoint into cfg.out_dir. A non-finite loss aborts the run but
// still leaves the partial trace and summary on disk.
RunSummary run_experiment(const ExperimentConfig& cfg);

struct ReferenceKl {
  double kl_vae = 0.0;
  bool converged = false;
  long steps_used = 0;
  double window_elbo = 0.0;  // mean ELBO over the final window
};

// Trains a plain VAE until the windowed ELBO stops moving (relative change
// below cfg.ref_tol across cfg.ref_window-step windows) or cfg.steps is hit;
// returns the mean KL over the final window. Non-convergence is flagged, not
// fatal.
ReferenceKl measure_reference_kl(const ExperimentConfig& cfg);

// Builds the dataset a config names (generated or loaded from file).
Dataset dataset_for_config(const ExperimentConfig& cfg);

}  // namespace cvae
