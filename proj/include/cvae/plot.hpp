#pragma once

#include <string>
#include <vector>

namespace cvae {

// Renders one SVG per panel (kl, beta, recon, elbo) from trace CSV files.
// Multiple files overlay as separate series (seed sweeps). The kl panel
// carries the set-point series as a dashed reference line. Returns the
// paths written; throws on empty input or empty traces.
std::vector<std::string> emit_plots(const std::vector<std::string>& trace_files,
                                    const std::string& out_dir);

}  // namespace cvae
