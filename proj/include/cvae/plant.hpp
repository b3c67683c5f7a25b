#pragma once

#include <vector>

#include "cvae/controller.hpp"
#include "cvae/rng.hpp"

namespace cvae {

// Cheap surrogate for the KL-vs-beta dynamics of a training run: first-order
// relaxation toward the monotone steady-state map g(beta) = A / (1 + c*beta).
// Lets the control loop be exercised in microseconds instead of minutes.
class FirstOrderPlant {
 public:
  struct Params {
    double a = 40.0;           // g(0), the unpenalized KL level
    double c = 3.0;            // actuation strength
    double eta = 0.05;         // relaxation rate per step, in (0, 1]
    double noise_sigma = 0.0;  // additive Gaussian noise, nats
    double kl0 = 0.0;          // initial KL state
    unsigned long seed = 0;
  };

  explicit FirstOrderPlant(const Params& p);

  // kl <- kl + eta * (g(beta) - kl) + noise, clamped at 0
  double step(double beta);

  double kl_state() const { return kl_state_; }
  double steady_state(double beta) const;

 private:
  Params p_;
  double kl_state_;
  Rng rng_;
};

struct ClosedLoopPoint {
  long step;
  double kl;
  double beta;       // weight the plant saw this step
  double error;
  double set_point;
  double integral;   // PI integral after the controller update (0 otherwise)
};

// Alternates plant and controller: the plant responds to the current weight,
// the controller turns the observed KL into the next weight.
std::vector<ClosedLoopPoint> closed_loop(FirstOrderPlant& plant,
                                         Controller& controller,
                                         double set_point, long steps);

// Same loop with a time-varying set point.
std::vector<ClosedLoopPoint> closed_loop(
    FirstOrderPlant& plant, Controller& controller,
    const std::vector<double>& set_points);

}  // namespace cvae
