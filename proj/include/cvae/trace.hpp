#pragma once

#include <optional>
#include <string>
#include <vector>

namespace cvae {

// One row of the per-step time series. tc is only present in modes that
// estimate total correlation.
struct TraceRecord {
  long step = 0;
  double kl = 0.0;
  std::optional<double> tc;
  double beta = 0.0;
  double recon = 0.0;
  double elbo = 0.0;
  double set_point = 0.0;
};

inline constexpr const char* kTraceCsvHeader =
    "step,kl,tc,beta,recon,elbo,set_point";

// Stable schema, %.17g formatting: identical runs produce identical bytes.
void write_trace_csv(const std::string& path,
                     const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_csv(const std::string& path);

}  // namespace cvae
