#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cvae/controller.hpp"
#include "cvae/plant.hpp"

using namespace cvae;

TEST_CASE("full relaxation jumps to the steady state in one step") {
  FirstOrderPlant p({40.0, 3.0, 1.0, 0.0, 0.0, 0});
  CHECK(p.step(1.0) == doctest::Approx(10.0).epsilon(1e-12));  // 40 / (1 + 3)
}

TEST_CASE("steady-state map") {
  FirstOrderPlant p({40.0, 3.0, 0.05, 0.0, 0.0, 0});
  CHECK(p.steady_state(1.0) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(p.steady_state(0.0) == doctest::Approx(40.0).epsilon(1e-15));
  CHECK(p.steady_state(0.5) == doctest::Approx(16.0).epsilon(1e-15));
}

TEST_CASE("constant beta converges monotonically to g(beta)") {
  FirstOrderPlant p({40.0, 3.0, 0.05, 0.0, 0.0, 0});
  const double target = p.steady_state(0.25);  // 40 / 1.75
  double prev = 0.0;
  double gap_prev = target;
  for (int t = 0; t < 400; ++t) {
    const double kl = p.step(0.25);
    CHECK(kl >= prev);  // rising toward the target from below
    const double gap = target - kl;
    CHECK(gap >= -1e-9);
    CHECK(gap <= gap_prev + 1e-12);
    prev = kl;
    gap_prev = gap;
  }
  CHECK(std::abs(p.kl_state() - target) < 1e-6);
}

TEST_CASE("closed loop reaches an achievable set point") {
  FirstOrderPlant plant({40.0, 3.0, 0.05, 0.0, 0.0, 0});
  Controller pi = PiController(0.01, 1e-3, 0.0, 1.0);
  const auto trace = closed_loop(plant, pi, 16.0, 5000);
  REQUIRE(trace.size() == 5000);
  const double final_kl = trace.back().kl;
  CHECK(std::abs(final_kl - 16.0) < 0.1);
  // lock-in: late-trace betas hover at the steady-state actuation 0.5
  CHECK(trace.back().beta == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("boundary set point: controller pinned at beta_min") {
  FirstOrderPlant plant({40.0, 3.0, 0.2, 0.0, 40.0, 0});
  Controller pi = PiController(0.01, 1e-3, 0.9, 1.0);
  // g(0.9) = 40 / 3.7 ~ 10.81; ask for g(beta_min) exactly
  const double sp = plant.steady_state(0.9);
  const auto trace = closed_loop(plant, pi, sp, 4000);
  CHECK(std::abs(trace.back().kl - sp) < 0.05);
}

TEST_CASE("unachievable set point saturates beta and freezes the integral") {
  FirstOrderPlant plant({40.0, 3.0, 0.05, 0.0, 0.0, 0});
  Controller c = PiController(0.01, 1e-3, 0.0, 1.0);
  const auto trace = closed_loop(plant, c, 45.0, 3000);  // above g(0) = 40

  // find the first step whose emitted beta was clamped to beta_min
  std::size_t first_sat = trace.size();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (i + 1 < trace.size() && trace[i + 1].beta == 0.0) {
      first_sat = i;
      break;
    }
  }
  REQUIRE(first_sat < trace.size());
  const double frozen = trace[first_sat + 1].integral;
  for (std::size_t i = first_sat + 1; i < trace.size(); ++i)
    CHECK(trace[i].integral == frozen);

  // KL settles at the plant ceiling g(0) = 40
  CHECK(trace.back().kl == doctest::Approx(40.0).epsilon(1e-3));
}

TEST_CASE("achievable set points settle within 1 percent with recommended gains") {
  for (double sp : {12.0, 16.0, 25.0, 35.0}) {  // inside [g(1), g(0)] = [10, 40]
    FirstOrderPlant plant({40.0, 3.0, 0.05, 0.0, 0.0, 0});
    Controller pi = PiController(0.01, 1e-3, 0.0, 1.0);
    const auto trace = closed_loop(plant, pi, sp, 20000);
    CHECK(std::abs(trace.back().error) < 0.01 * sp);
  }
}

TEST_CASE("noise robustness: time-averaged error stays within 2 percent") {
  // per-step shocks accumulate to a state noise floor of sigma/sqrt(2*eta),
  // so the meaningful statistic is the signed mean error (steady-state bias)
  const double sp = 16.0;
  for (unsigned long seed = 1; seed <= 10; ++seed) {
    FirstOrderPlant plant({40.0, 3.0, 0.05, 0.02 * sp, 0.0, seed});
    Controller pi = PiController(0.01, 1e-3, 0.0, 1.0);
    const auto trace = closed_loop(plant, pi, sp, 10000);
    double acc = 0.0;
    const std::size_t tail = trace.size() / 5;
    for (std::size_t i = trace.size() - tail; i < trace.size(); ++i)
      acc += trace[i].error;
    CHECK(std::abs(acc / tail) < 0.02 * sp);
  }
}

TEST_CASE("plant input validation") {
  CHECK_THROWS(FirstOrderPlant({40.0, 3.0, 0.0, 0.0, 0.0, 0}));   // eta = 0
  CHECK_THROWS(FirstOrderPlant({40.0, 3.0, 1.5, 0.0, 0.0, 0}));   // eta > 1
  CHECK_THROWS(FirstOrderPlant({40.0, -1.0, 0.5, 0.0, 0.0, 0}));  // c < 0
  FirstOrderPlant ok({40.0, 3.0, 0.5, 0.0, 0.0, 0});
  CHECK_THROWS(ok.step(-0.5));
}
