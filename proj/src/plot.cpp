#include "cvae/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>

#include "cvae/trace.hpp"

namespace cvae {

namespace {

constexpr int kWidth = 860;
constexpr int kHeight = 420;
constexpr int kMarginL = 70, kMarginR = 20, kMarginT = 30, kMarginB = 40;
constexpr std::size_t kMaxPoints = 2000;

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

struct Series {
  std::vector<double> x, y;
};

std::string polyline(const Series& s, double xmin, double xmax, double ymin,
                     double ymax, const std::string& color,
                     const std::string& id, bool dashed) {
  const double xs = (kWidth - kMarginL - kMarginR) / std::max(xmax - xmin, 1e-12);
  const double ys = (kHeight - kMarginT - kMarginB) / std::max(ymax - ymin, 1e-12);
  const std::size_t stride = std::max<std::size_t>(1, s.x.size() / kMaxPoints);
  std::string pts;
  for (std::size_t i = 0; i < s.x.size(); i += stride) {
    const double px = kMarginL + (s.x[i] - xmin) * xs;
    const double py = kHeight - kMarginB - (s.y[i] - ymin) * ys;
    pts += std::to_string(px) + "," + std::to_string(py) + " ";
  }
  // always include the final point
  const double px = kMarginL + (s.x.back() - xmin) * xs;
  const double py = kHeight - kMarginB - (s.y.back() - ymin) * ys;
  pts += std::to_string(px) + "," + std::to_string(py);
  std::string attrs = "fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.2\"";
  if (dashed) attrs += " stroke-dasharray=\"6,4\"";
  return "  <polyline id=\"" + id + "\" " + attrs + " points=\"" + pts + "\"/>\n";
}

void write_panel(const std::string& path, const std::string& title,
                 const std::vector<Series>& series, const Series* reference) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  auto expand = [&](const Series& s) {
    for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
    for (double v : s.y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
  };
  for (const auto& s : series) expand(s);
  if (reference) expand(*reference);
  if (ymax == ymin) { ymax += 1.0; ymin -= 1.0; }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  std::ofstream os(path);
  if (!os) throw std::runtime_error("emit_plots: cannot open " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\">\n";
  os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "  <text x=\"" << kMarginL << "\" y=\"20\" font-family=\"sans-serif\" "
        "font-size=\"14\">" << title << "</text>\n";
  // axes
  os << "  <line x1=\"" << kMarginL << "\" y1=\"" << kHeight - kMarginB
     << "\" x2=\"" << kWidth - kMarginR << "\" y2=\"" << kHeight - kMarginB
     << "\" stroke=\"black\"/>\n";
  os << "  <line x1=\"" << kMarginL << "\" y1=\"" << kMarginT << "\" x2=\""
     << kMarginL << "\" y2=\"" << kHeight - kMarginB << "\" stroke=\"black\"/>\n";
  // axis extents
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", ymin + pad);
  os << "  <text x=\"4\" y=\"" << kHeight - kMarginB
     << "\" font-family=\"sans-serif\" font-size=\"11\">" << buf << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%.4g", ymax - pad);
  os << "  <text x=\"4\" y=\"" << kMarginT + 10
     << "\" font-family=\"sans-serif\" font-size=\"11\">" << buf << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%.0f", xmax);
  os << "  <text x=\"" << kWidth - kMarginR - 40 << "\" y=\"" << kHeight - 10
     << "\" font-family=\"sans-serif\" font-size=\"11\">step " << buf
     << "</text>\n";

  if (reference && !reference->x.empty()) {
    os << polyline(*reference, xmin, xmax, ymin, ymax, "#444444", "setpoint",
                   true);
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    os << polyline(series[i], xmin, xmax, ymin, ymax,
                   kSeriesColors[i % 8], "series" + std::to_string(i), false);
  }
  os << "</svg>\n";
}

}  // namespace

std::vector<std::string> emit_plots(const std::vector<std::string>& trace_files,
                                    const std::string& out_dir) {
  if (trace_files.empty())
    throw std::invalid_argument("emit_plots: no trace files given");

  std::vector<std::vector<TraceRecord>> traces;
  for (const auto& f : trace_files) {
    auto t = read_trace_csv(f);
    if (t.empty()) throw std::runtime_error("emit_plots: empty trace " + f);
    traces.push_back(std::move(t));
  }

  std::filesystem::create_directories(out_dir);

  struct Panel {
    const char* name;
    const char* title;
    std::function<double(const TraceRecord&)> get;
    bool with_setpoint;
  };
  const std::vector<Panel> panels = {
      {"kl", "KL divergence", [](const TraceRecord& r) { return r.kl; }, true},
      {"beta", "beta(t)", [](const TraceRecord& r) { return r.beta; }, false},
      {"recon", "reconstruction log-likelihood",
       [](const TraceRecord& r) { return r.recon; }, false},
      {"elbo", "ELBO", [](const TraceRecord& r) { return r.elbo; }, false},
  };

  std::vector<std::string> written;
  for (const auto& panel : panels) {
    std::vector<Series> series;
    for (const auto& t : traces) {
      Series s;
      for (const auto& r : t) {
        s.x.push_back(static_cast<double>(r.step));
        s.y.push_back(panel.get(r));
      }
      series.push_back(std::move(s));
    }
    Series ref;
    if (panel.with_setpoint) {
      for (const auto& r : traces.front()) {
        ref.x.push_back(static_cast<double>(r.step));
        ref.y.push_back(r.set_point);
      }
    }
    const std::string path =
        (std::filesystem::path(out_dir) / (std::string(panel.name) + ".svg"))
            .string();
    write_panel(path, panel.title, series, panel.with_setpoint ? &ref : nullptr);
    written.push_back(path);
  }
  return written;
}

}  // namespace cvae
