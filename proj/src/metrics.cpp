#include "cvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace cvae {

namespace {

// quantile bin assignment; duplicate edges collapse so heavily tied data
// lands in fewer bins
std::vector<int> quantile_bins(const std::vector<double>& values,
                               std::size_t bins) {
  const std::size_t n = values.size();
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  for (std::size_t b = 1; b < bins; ++b) {
    const double e = sorted[b * n / bins];
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<int>(
        std::upper_bound(edges.begin(), edges.end(), values[i]) - edges.begin());
  }
  return out;
}

double plugin_entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace

double mutual_info_discrete(const std::vector<double>& latent_values,
                            const std::vector<int>& factor_labels,
                            std::size_t bins) {
  if (latent_values.size() != factor_labels.size())
    throw std::invalid_argument("mutual_info_discrete: length mismatch");
  if (bins < 2) throw std::invalid_argument("mutual_info_discrete: bins < 2");
  const std::size_t n = latent_values.size();
  if (n == 0) throw std::invalid_argument("mutual_info_discrete: empty input");

  const auto lbins = quantile_bins(latent_values, bins);
  std::map<int, int> label_index;
  for (int v : factor_labels) label_index.emplace(v, 0);
  int next = 0;
  for (auto& [k, idx] : label_index) idx = next++;

  const std::size_t rows = bins, cols = label_index.size();
  std::vector<double> joint(rows * cols, 0.0), pa(rows, 0.0), pb(cols, 0.0);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = static_cast<std::size_t>(lbins[i]);
    const std::size_t c = static_cast<std::size_t>(label_index[factor_labels[i]]);
    joint[r * cols + c] += w;
    pa[r] += w;
    pb[c] += w;
  }

  double mi = plugin_entropy(pa) + plugin_entropy(pb) - plugin_entropy(joint);

  // Miller-Madow: H_mm = H + (occupied - 1) / (2n)
  const auto occupied = [](const std::vector<double>& p) {
    std::size_t m = 0;
    for (double v : p)
      if (v > 0.0) ++m;
    return static_cast<double>(m);
  };
  mi += (occupied(pa) - 1.0 + occupied(pb) - 1.0 - (occupied(joint) - 1.0)) /
        (2.0 * static_cast<double>(n));

  const double cap = std::min(plugin_entropy(pa), plugin_entropy(pb));
  return std::clamp(mi, 0.0, cap);
}

MigReport mig(const Tensor2& latent_means,
              const std::vector<std::string>& factor_names,
              const std::vector<std::vector<int>>& factor_values,
              std::size_t bins) {
  if (latent_means.cols < 2)
    throw std::invalid_argument("mig: need at least two latents");
  if (factor_names.size() != factor_values.size() || factor_names.empty())
    throw std::invalid_argument("mig: bad factor tables");
  const std::size_t n = latent_means.rows;
  const std::size_t n_latents = latent_means.cols;
  const std::size_t n_factors = factor_names.size();

  MigReport report;
  report.bins = bins;
  report.mi_matrix = Tensor2(n_factors, n_latents);

  for (std::size_t f = 0; f < n_factors; ++f) {
    if (factor_values[f].size() != n)
      throw std::invalid_argument("mig: factor column length mismatch");

    std::map<int, double> counts;
    for (int v : factor_values[f]) counts[v] += 1.0 / static_cast<double>(n);
    std::vector<double> pf;
    for (auto& [k, p] : counts) pf.push_back(p);
    const double hf = plugin_entropy(pf);

    double best = -1.0, second = -1.0;
    std::size_t best_j = 0, second_j = 0;
    std::vector<double> column(n);
    for (std::size_t j = 0; j < n_latents; ++j) {
      for (std::size_t i = 0; i < n; ++i) column[i] = latent_means(i, j);
      const double mi = mutual_info_discrete(column, factor_values[f], bins);
      report.mi_matrix(f, j) = mi;
      if (mi > best) {
        second = best;
        second_j = best_j;
        best = mi;
        best_j = j;
      } else if (mi > second) {
        second = mi;
        second_j = j;
      }
    }
    const double gap =
        hf > 0.0 ? std::clamp((best - second) / hf, 0.0, 1.0) : 0.0;
    report.per_factor.push_back({factor_names[f], gap, hf, best_j, second_j});
    report.overall += gap;
  }
  report.overall /= static_cast<double>(n_factors);
  return report;
}

std::string MigReport::to_json() const {
  nlohmann::json j;
  j["overall"] = overall;
  j["bins"] = bins;
  j["per_factor"] = nlohmann::json::array();
  for (const auto& f : per_factor) {
    j["per_factor"].push_back({{"factor", f.name},
                               {"gap", f.gap},
                               {"entropy", f.entropy},
                               {"top1_latent", f.top1_latent},
                               {"top2_latent", f.top2_latent}});
  }
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t f = 0; f < mi_matrix.rows; ++f) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t l = 0; l < mi_matrix.cols; ++l) row.push_back(mi_matrix(f, l));
    rows.push_back(row);
  }
  j["mi_matrix"] = rows;
  return j.dump(2);
}

TraceStats trace_stats(const std::vector<double>& values, double set_point,
                       double band_pct, double window_pct) {
  if (values.empty()) throw std::invalid_argument("trace_stats: empty trace");
  TraceStats s;
  const double band = std::abs(set_point) * band_pct / 100.0;

  long first_stable = static_cast<long>(values.size());
  for (long i = static_cast<long>(values.size()); i-- > 0;) {
    if (std::abs(values[static_cast<std::size_t>(i)] - set_point) > band) break;
    first_stable = i;
  }
  s.settled = first_stable < static_cast<long>(values.size());
  s.settling_time = s.settled ? first_stable : static_cast<long>(values.size());

  double mx = values[0];
  for (double v : values) mx = std::max(mx, v);
  s.overshoot = mx - set_point;

  std::size_t window = static_cast<std::size_t>(
      std::ceil(values.size() * window_pct / 100.0));
  window = std::clamp<std::size_t>(window, 1, values.size());
  double acc = 0.0;
  for (std::size_t i = values.size() - window; i < values.size(); ++i)
    acc += std::abs(values[i] - set_point);
  s.steady_state_error = acc / static_cast<double>(window);
  return s;
}

}  // namespace cvae
