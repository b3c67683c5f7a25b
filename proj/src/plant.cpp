#include "cvae/plant.hpp"

#include <algorithm>
#include <stdexcept>

namespace cvae {

FirstOrderPlant::FirstOrderPlant(const Params& p)
    : p_(p), kl_state_(p.kl0), rng_(p.seed) {
  if (!(p.eta > 0.0 && p.eta <= 1.0))
    throw std::invalid_argument("FirstOrderPlant: eta must be in (0, 1]");
  if (p.c <= 0.0 || p.a < 0.0)
    throw std::invalid_argument("FirstOrderPlant: need a >= 0 and c > 0");
  if (p.kl0 < 0.0)
    throw std::invalid_argument("FirstOrderPlant: initial KL must be >= 0");
}

double FirstOrderPlant::steady_state(double beta) const {
  return p_.a / (1.0 + p_.c * beta);
}

double FirstOrderPlant::step(double beta) {
  if (beta < 0.0) throw std::invalid_argument("FirstOrderPlant: beta < 0");
  double next = kl_state_ + p_.eta * (steady_state(beta) - kl_state_);
  if (p_.noise_sigma > 0.0) next += p_.noise_sigma * rng_.next_normal();
  kl_state_ = std::max(next, 0.0);
  return kl_state_;
}

std::vector<ClosedLoopPoint> closed_loop(FirstOrderPlant& plant,
                                         Controller& controller,
                                         double set_point, long steps) {
  return closed_loop(plant, controller,
                     std::vector<double>(static_cast<std::size_t>(steps),
                                         set_point));
}

std::vector<ClosedLoopPoint> closed_loop(
    FirstOrderPlant& plant, Controller& controller,
    const std::vector<double>& set_points) {
  if (set_points.empty())
    throw std::invalid_argument("closed_loop: need at least one step");
  std::vector<ClosedLoopPoint> trace;
  trace.reserve(set_points.size());
  double beta = std::max(controller_initial_output(controller), 0.0);
  for (std::size_t i = 0; i < set_points.size(); ++i) {
    const long t = static_cast<long>(i) + 1;
    const double kl = plant.step(beta);
    const double sp = set_points[i];
    const double e = sp - kl;
    const double next_beta = controller_step(controller, ControlError(e, t));
    double integral = 0.0;
    if (const auto* pi = std::get_if<PiController>(&controller))
      integral = pi->integral();
    trace.push_back({t, kl, beta, e, sp, integral});
    beta = std::max(next_beta, 0.0);
  }
  return trace;
}

}  // namespace cvae
