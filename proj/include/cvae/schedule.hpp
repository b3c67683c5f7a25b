#pragma once

namespace cvae {

// Stepwise capacity annealing: the KL set point starts at c_start and rises
// by step_size every `interval` training steps until it reaches c_target.
struct CapacitySchedule {
  double c_start = 0.5;
  double c_target = 0.5;
  double step_size = 0.15;
  long interval = 5000;

  CapacitySchedule() = default;
  CapacitySchedule(double start, double target, double step, long every);

  double set_point_at(long t) const;
};

// Closed-form guidance for choosing a KL set point above a measured plain
// VAE reference: set points in [kl_vae, kl_vae + d_max] with
// d_max = 2 + 2*sqrt(2*kl_vae + 1) are the range where an ELBO improvement
// is still possible. Advisory only; the assumptions behind it (Lipschitz
// decoder, shared decoder weights) are not checked.
struct SetPointAdvice {
  double kl_vae;
  double d_max;
  double range_lo;  // equals kl_vae
  double range_hi;  // kl_vae + d_max
  double lipschitz_k = 1.0;
};

SetPointAdvice advise_set_point(double kl_vae);

// Upper bound sqrt(4 * (2*kl_vae + d)) on the reconstruction-term gap
// between a run holding KL at kl_vae + d and the plain VAE reference.
double reconstruction_gap_bound(double kl_vae, double d);

}  // namespace cvae
