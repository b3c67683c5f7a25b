#include "cvae/trace.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cvae {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_csv(const std::string& path,
                     const std::vector<TraceRecord>& trace) {
  std::ofstream os(path, std::ios::binary);  // binary: no platform newline games
  if (!os) throw std::runtime_error("write_trace_csv: cannot open " + path);
  os << kTraceCsvHeader << "\n";
  for (const auto& r : trace) {
    os << r.step << ',' << fmt(r.kl) << ',';
    if (r.tc) os << fmt(*r.tc);
    os << ',' << fmt(r.beta) << ',' << fmt(r.recon) << ',' << fmt(r.elbo) << ','
       << fmt(r.set_point) << "\n";
  }
  if (!os) throw std::runtime_error("write_trace_csv: write failed: " + path);
}

std::vector<TraceRecord> read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_trace_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("read_trace_csv: empty file " + path);
  if (line != kTraceCsvHeader)
    throw std::runtime_error("read_trace_csv: unexpected header in " + path);

  std::vector<TraceRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    TraceRecord r;
    auto next = [&]() {
      if (!std::getline(ss, field, ','))
        throw std::runtime_error("read_trace_csv: short row in " + path);
      return field;
    };
    r.step = std::stol(next());
    r.kl = std::stod(next());
    const std::string tc = next();
    if (!tc.empty()) r.tc = std::stod(tc);
    r.beta = std::stod(next());
    r.recon = std::stod(next());
    r.elbo = std::stod(next());
    r.set_point = std::stod(next());
    out.push_back(r);
  }
  return out;
}

}  // namespace cvae
