#include "cvae/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cvae {

CapacitySchedule::CapacitySchedule(double start, double target, double step,
                                   long every)
    : c_start(start), c_target(target), step_size(step), interval(every) {
  if (c_start > c_target)
    throw std::invalid_argument("CapacitySchedule: c_start must be <= c_target");
  if (!(step_size > 0.0))
    throw std::invalid_argument("CapacitySchedule: step_size must be > 0");
  if (interval < 1)
    throw std::invalid_argument("CapacitySchedule: interval must be >= 1");
}

double CapacitySchedule::set_point_at(long t) const {
  if (t < 0) throw std::invalid_argument("CapacitySchedule: negative step");
  const double raised = c_start + static_cast<double>(t / interval) * step_size;
  return std::min(raised, c_target);
}

SetPointAdvice advise_set_point(double kl_vae) {
  if (kl_vae < 0.0)
    throw std::invalid_argument("advise_set_point: kl_vae must be >= 0");
  SetPointAdvice a;
  a.kl_vae = kl_vae;
  a.d_max = 2.0 + 2.0 * std::sqrt(2.0 * kl_vae + 1.0);
  a.range_lo = kl_vae;
  a.range_hi = kl_vae + a.d_max;
  return a;
}

double reconstruction_gap_bound(double kl_vae, double d) {
  if (kl_vae < 0.0 || d < 0.0)
    throw std::invalid_argument("reconstruction_gap_bound: negative input");
  return std::sqrt(4.0 * (2.0 * kl_vae + d));
}

}  // namespace cvae
