#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cvae/tensor.hpp"

namespace cvae {

// Histogram mutual information between a continuous latent and a discrete
// factor, in nats. The latent is quantile-binned (at most `bins` bins), and
// the plug-in estimate gets a Miller-Madow correction so that independent
// noise scores near zero even at small sample sizes. Clamped to
// [0, min(H(latent), H(factor))]. A constant latent scores 0.
double mutual_info_discrete(const std::vector<double>& latent_values,
                            const std::vector<int>& factor_labels,
                            std::size_t bins);

struct FactorScore {
  std::string name;
  double gap;      // (MI(top1) - MI(top2)) / H(factor), in [0, 1]
  double entropy;  // H(factor), nats
  std::size_t top1_latent;
  std::size_t top2_latent;
};

struct MigReport {
  std::vector<FactorScore> per_factor;
  double overall = 0.0;  // mean per-factor gap
  Tensor2 mi_matrix;     // factors x latents, nats
  std::size_t bins = 0;

  std::string to_json() const;
};

// Mutual information gap over encoder means. Needs at least two latents.
MigReport mig(const Tensor2& latent_means,
              const std::vector<std::string>& factor_names,
              const std::vector<std::vector<int>>& factor_values,
              std::size_t bins = 20);

struct TraceStats {
  long settling_time = 0;     // steps before the trace stays inside the band
  bool settled = false;
  double overshoot = 0.0;     // max(value) - set point
  double steady_state_error = 0.0;  // mean |error| over the final window
};

// band_pct and window_pct are percentages: band_pct = 1 means the trace must
// stay within 1% of the set point; window_pct = 10 averages the last 10%.
TraceStats trace_stats(const std::vector<double>& values, double set_point,
                       double band_pct, double window_pct);

}  // namespace cvae
