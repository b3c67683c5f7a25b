#include "cvae/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cvae/schedule.hpp"

namespace cvae {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string strip_quotes(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw std::invalid_argument("config: bad number for " + key + ": " + v);
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw std::invalid_argument("config: bad integer for " + key + ": " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad bool for " + key + ": " + v);
}

std::vector<std::size_t> to_size_list(const std::string& key, std::string v) {
  if (!v.empty() && v.front() == '[') v = v.substr(1);
  if (!v.empty() && v.back() == ']') v.pop_back();
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const long n = to_long(key, item);
    if (n <= 0) throw std::invalid_argument("config: " + key + " entries must be > 0");
    out.push_back(static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace

void apply_override(ExperimentConfig& c, const std::string& key,
                    const std::string& raw_value) {
  const std::string value = strip_quotes(trim(raw_value));
  if (key == "mode") c.mode = value;
  else if (key == "dataset") c.dataset = value;
  else if (key == "dataset_file") c.dataset_file = value;
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(to_long(key, value));
    c.seed_set = true;
  } else if (key == "steps") c.steps = to_long(key, value);
  else if (key == "batch_size") c.batch_size = static_cast<std::size_t>(to_long(key, value));
  else if (key == "latent_dim") c.latent_dim = static_cast<std::size_t>(to_long(key, value));
  else if (key == "enc_hidden") c.enc_hidden = to_size_list(key, value);
  else if (key == "dec_hidden") c.dec_hidden = to_size_list(key, value);
  else if (key == "likelihood") c.likelihood = value;
  else if (key == "hidden_act") c.hidden_act = value;
  else if (key == "lr") c.lr = to_double(key, value);
  else if (key == "adam_beta1") c.adam_beta1 = to_double(key, value);
  else if (key == "adam_beta2") c.adam_beta2 = to_double(key, value);
  else if (key == "adam_eps") c.adam_eps = to_double(key, value);
  else if (key == "kp") c.kp = to_double(key, value);
  else if (key == "ki") c.ki = to_double(key, value);
  else if (key == "beta_min") c.beta_min = to_double(key, value);
  else if (key == "beta_max") c.beta_max = to_double(key, value);
  else if (key == "anti_windup") c.anti_windup = to_bool(key, value);
  else if (key == "set_point") {
    c.set_point = to_double(key, value);
    c.set_point_set = true;
  } else if (key == "schedule") c.schedule = to_bool(key, value);
  else if (key == "schedule_start") c.schedule_start = to_double(key, value);
  else if (key == "schedule_target") c.schedule_target = to_double(key, value);
  else if (key == "schedule_step") c.schedule_step = to_double(key, value);
  else if (key == "schedule_interval") c.schedule_interval = to_long(key, value);
  else if (key == "beta") c.beta = to_double(key, value);
  else if (key == "alpha") c.alpha = to_double(key, value);
  else if (key == "kl_ema") c.kl_ema = to_double(key, value);
  else if (key == "gm_k") c.gm_k = static_cast<std::size_t>(to_long(key, value));
  else if (key == "gm_dim") c.gm_dim = static_cast<std::size_t>(to_long(key, value));
  else if (key == "gm_n") c.gm_n = static_cast<std::size_t>(to_long(key, value));
  else if (key == "plant_a") c.plant_a = to_double(key, value);
  else if (key == "plant_c") c.plant_c = to_double(key, value);
  else if (key == "plant_eta") c.plant_eta = to_double(key, value);
  else if (key == "plant_noise") c.plant_noise = to_double(key, value);
  else if (key == "plant_kl0") c.plant_kl0 = to_double(key, value);
  else if (key == "ref_window") c.ref_window = to_long(key, value);
  else if (key == "ref_tol") c.ref_tol = to_double(key, value);
  else if (key == "band_pct") c.band_pct = to_double(key, value);
  else if (key == "window_pct") c.window_pct = to_double(key, value);
  else if (key == "compute_mig") c.compute_mig = to_bool(key, value);
  else if (key == "save_checkpoint") c.save_checkpoint = to_bool(key, value);
  else if (key == "save_dataset_file") c.save_dataset_file = to_bool(key, value);
  else throw std::invalid_argument("config: unknown key: " + key);
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    // strip comments outside quotes
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_quote = !in_quote;
      if (line[i] == '#' && !in_quote) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_override(cfg, key, value);
    } catch (const std::exception& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

void ExperimentConfig::validate() const {
  static const char* kModes[] = {"controlvae", "control_factorvae", "plain_vae",
                                 "beta_vae",   "lagrange",          "plant_only"};
  bool known = false;
  for (const char* m : kModes) known |= (mode == m);
  if (!known)
    throw std::invalid_argument("config: unknown mode '" + mode + "'");
  if (!seed_set) throw std::invalid_argument("config: seed is mandatory");
  if (steps < 1) throw std::invalid_argument("config: steps must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (dataset != "mini_shapes" && dataset != "gauss_mixture" && dataset_file.empty())
    throw std::invalid_argument("config: unknown dataset '" + dataset + "'");

  const bool needs_set_point = mode == "controlvae" || mode == "control_factorvae" ||
                               mode == "lagrange" || mode == "plant_only";
  if (needs_set_point && !set_point_set && !schedule)
    throw std::invalid_argument("config: mode " + mode +
                                " needs set_point or a schedule");
  if (schedule && !(schedule_target > 0.0))
    throw std::invalid_argument("config: schedule_target must be > 0");
  if (mode == "beta_vae" && beta < 0.0)
    throw std::invalid_argument("config: beta must be >= 0");
  if (kl_ema < 0.0 || kl_ema >= 1.0)
    throw std::invalid_argument("config: kl_ema must be in [0, 1)");
}

double ExperimentConfig::set_point_at(long t) const {
  if (!schedule) return set_point;
  const CapacitySchedule s(schedule_start, schedule_target, schedule_step,
                           schedule_interval);
  return s.set_point_at(t);
}

}  // namespace cvae
