#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cvae/rng.hpp"
#include "cvae/schedule.hpp"

using namespace cvae;

TEST_CASE("capacity schedule steps from c_start toward c_target") {
  CapacitySchedule s(0.5, 18.0, 0.15, 5000);
  CHECK(s.set_point_at(0) == 0.5);
  CHECK(s.set_point_at(4999) == 0.5);
  CHECK(s.set_point_at(5000) == doctest::Approx(0.65).epsilon(1e-12));
  CHECK(s.set_point_at(10000) == doctest::Approx(0.80).epsilon(1e-12));
  CHECK(s.set_point_at(100000000) == 18.0);
}

TEST_CASE("capacity schedule is non-decreasing and saturates") {
  CapacitySchedule s(0.5, 16.0, 0.5, 1000);
  Rng rng(5);
  double prev = s.set_point_at(0);
  for (long t = 1; t <= 60000; t += 1 + static_cast<long>(rng.next_index(37))) {
    const double v = s.set_point_at(t);
    CHECK(v >= prev);
    CHECK(v <= 16.0);
    prev = v;
  }
  CHECK(s.set_point_at(60000) == 16.0);
}

TEST_CASE("schedule constructor rejects bad parameters") {
  CHECK_THROWS(CapacitySchedule(2.0, 1.0, 0.1, 100));
  CHECK_THROWS(CapacitySchedule(0.5, 16.0, 0.0, 100));
  CHECK_THROWS(CapacitySchedule(0.5, 16.0, 0.1, 0));
  CHECK_THROWS(CapacitySchedule(0.5, 16.0, 0.1, 100).set_point_at(-1));
}

TEST_CASE("set point advice closed form") {
  CHECK(advise_set_point(0.0).d_max == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(advise_set_point(4.0).d_max == doctest::Approx(8.0).epsilon(1e-15));

  const auto a = advise_set_point(118.0);
  CHECK(a.d_max == doctest::Approx(2.0 + 2.0 * std::sqrt(237.0)).epsilon(1e-15));
  CHECK(a.d_max == doctest::Approx(32.79).epsilon(1e-3));
  CHECK(a.range_lo == 118.0);
  CHECK(145.0 > a.range_lo);
  CHECK(145.0 < a.range_hi);

  CHECK_THROWS(advise_set_point(-1.0));
}

TEST_CASE("d_max solves the boundary quadratic d^2 = 4(2 kl + d)") {
  for (double kl : {0.0, 0.5, 3.0, 16.0, 118.0, 145.0, 7.25, 1000.0}) {
    const double d = advise_set_point(kl).d_max;
    const double lhs = d * d;
    const double rhs = 4.0 * (2.0 * kl + d);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(lhs, rhs));
    CHECK(d >= 2.0);
  }
}

TEST_CASE("d_max is monotone increasing in kl_vae") {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.next_uniform(0.0, 200.0);
    const double b = a + rng.next_uniform(1e-6, 10.0);
    CHECK(advise_set_point(b).d_max > advise_set_point(a).d_max);
  }
}

TEST_CASE("reconstruction gap bound") {
  CHECK(reconstruction_gap_bound(0.0, 0.0) == 0.0);
  CHECK(reconstruction_gap_bound(3.0, 1.0) ==
        doctest::Approx(std::sqrt(28.0)).epsilon(1e-15));
  CHECK(reconstruction_gap_bound(3.0, 1.0) == doctest::Approx(5.2915).epsilon(1e-4));

  // at d = d_max the bound is met with equality
  for (double kl : {0.0, 1.0, 16.0, 118.0}) {
    const double d = advise_set_point(kl).d_max;
    CHECK(reconstruction_gap_bound(kl, d) == doctest::Approx(d).epsilon(1e-12));
  }
  CHECK_THROWS(reconstruction_gap_bound(-1.0, 0.0));
  CHECK_THROWS(reconstruction_gap_bound(1.0, -0.1));
}
