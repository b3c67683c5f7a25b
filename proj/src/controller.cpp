#include "cvae/controller.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cvae {

namespace {

// exp(709) overflows; the P term is fully saturated long before |e| = 50.
constexpr double kErrorClip = 50.0;

double p_term(double kp, double error) {
  const double e = std::clamp(error, -kErrorClip, kErrorClip);
  return kp / (1.0 + std::exp(e));
}

}  // namespace

ControlError::ControlError(double value_in, long step_in)
    : value(value_in), step(step_in) {
  if (!std::isfinite(value_in)) {
    throw std::invalid_argument(
        "ControlError: non-finite error at step " + std::to_string(step_in) +
        " (training diverged?)");
  }
}

PiController::PiController(double kp, double ki, double beta_min,
                           double beta_max)
    : kp_(kp), ki_(ki), beta_min_(beta_min), beta_max_(beta_max) {
  if (kp < 0.0 || ki < 0.0)
    throw std::invalid_argument("PiController: gains must be >= 0");
  if (!(beta_max > beta_min))
    throw std::invalid_argument("PiController: beta_max must exceed beta_min");
  last_beta_ = beta_min_;
}

double PiController::step(const ControlError& error) {
  // Conditional integration: while the previous unclamped output sat outside
  // [beta_min, beta_max], the integral only moves in the direction that
  // brings the output back into range. Freezing unconditionally instead can
  // latch the loop shut: an integral frozen further from the range than kp
  // can reach leaves the P term unable to recover even after the error
  // changes sign.
  const bool low = last_unclamped_.has_value() && *last_unclamped_ < beta_min_;
  const bool high = last_unclamped_.has_value() && *last_unclamped_ > beta_max_;
  const double delta = -ki_ * error.value;
  const bool pushes_out = (low && delta < 0.0) || (high && delta > 0.0);
  if (!(anti_windup_ && pushes_out)) {
    integral_ += delta;
  }

  const double unclamped = p_term(kp_, error.value) + integral_ + beta_min_;
  if (unclamped < beta_min_ || unclamped > beta_max_) ++saturation_count_;
  last_unclamped_ = unclamped;
  last_beta_ = std::clamp(unclamped, beta_min_, beta_max_);
  ++step_count_;
  return last_beta_;
}

std::string PiController::to_json() const {
  nlohmann::json j;
  j["kind"] = "pi";
  j["kp"] = kp_;
  j["ki"] = ki_;
  j["beta_min"] = beta_min_;
  j["beta_max"] = beta_max_;
  j["integral"] = integral_;
  j["last_beta"] = last_beta_;
  j["step_count"] = step_count_;
  j["saturation_count"] = saturation_count_;
  j["anti_windup"] = anti_windup_;
  if (last_unclamped_) j["last_unclamped"] = *last_unclamped_;
  return j.dump();
}

PiController PiController::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (j.at("kind") != "pi")
    throw std::invalid_argument("PiController::from_json: wrong kind");
  PiController c(j.at("kp"), j.at("ki"), j.at("beta_min"), j.at("beta_max"));
  c.integral_ = j.at("integral");
  c.last_beta_ = j.at("last_beta");
  c.step_count_ = j.at("step_count");
  c.saturation_count_ = j.value("saturation_count", 0L);
  c.anti_windup_ = j.value("anti_windup", true);
  if (j.contains("last_unclamped"))
    c.last_unclamped_ = j.at("last_unclamped").get<double>();
  return c;
}

LagrangeController::LagrangeController(double alpha, double lambda0)
    : alpha_(alpha), lambda_(lambda0) {
  if (!(alpha > 0.0))
    throw std::invalid_argument("LagrangeController: alpha must be > 0");
}

double LagrangeController::step(const ControlError& error) {
  lambda_ -= alpha_ * error.value;
  ++step_count_;
  return lambda_;
}

std::string LagrangeController::to_json() const {
  nlohmann::json j;
  j["kind"] = "lagrange";
  j["alpha"] = alpha_;
  j["lambda"] = lambda_;
  j["step_count"] = step_count_;
  return j.dump();
}

LagrangeController LagrangeController::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (j.at("kind") != "lagrange")
    throw std::invalid_argument("LagrangeController::from_json: wrong kind");
  LagrangeController c(j.at("alpha"), j.at("lambda"));
  c.step_count_ = j.at("step_count");
  return c;
}

FixedBetaController::FixedBetaController(double beta) : beta_(beta) {
  if (beta < 0.0)
    throw std::invalid_argument("FixedBetaController: beta must be >= 0");
}

double FixedBetaController::step(const ControlError& error) {
  (void)error;  // still validated by ControlError's constructor
  ++step_count_;
  return beta_;
}

std::string FixedBetaController::to_json() const {
  nlohmann::json j;
  j["kind"] = "fixed";
  j["beta"] = beta_;
  j["step_count"] = step_count_;
  return j.dump();
}

FixedBetaController FixedBetaController::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (j.at("kind") != "fixed")
    throw std::invalid_argument("FixedBetaController::from_json: wrong kind");
  FixedBetaController c(j.at("beta"));
  c.step_count_ = j.at("step_count");
  return c;
}

double controller_step(Controller& c, const ControlError& e) {
  return std::visit([&](auto& ctrl) { return ctrl.step(e); }, c);
}

double controller_initial_output(const Controller& c) {
  return std::visit([](const auto& ctrl) { return ctrl.initial_output(); }, c);
}

std::string controller_to_json(const Controller& c) {
  return std::visit([](const auto& ctrl) { return ctrl.to_json(); }, c);
}

Controller controller_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  const std::string kind = j.at("kind");
  if (kind == "pi") return PiController::from_json(json_text);
  if (kind == "lagrange") return LagrangeController::from_json(json_text);
  if (kind == "fixed") return FixedBetaController::from_json(json_text);
  throw std::invalid_argument("controller_from_json: unknown kind " + kind);
}

GainReport validate_gains(double kp, double ki, double v_kl, double epsilon) {
  if (!(v_kl > 0.0)) throw std::invalid_argument("validate_gains: v_kl must be > 0");
  if (!(epsilon > 0.0))
    throw std::invalid_argument("validate_gains: epsilon must be > 0");

  GainReport r;
  // exp is safe up to ~709; beyond that the limit is effectively unbounded
  r.kp_limit = (1.0 + std::exp(std::min(v_kl, 700.0))) * epsilon;
  r.kp_ok = kp <= r.kp_limit;
  r.ki_band_lo = 1e-4;
  r.ki_band_hi = 1e-3;
  r.ki_in_band = ki >= r.ki_band_lo && ki <= r.ki_band_hi;

  std::ostringstream msg;
  msg << "kp " << (r.kp_ok ? "ok" : "too large") << " (limit " << r.kp_limit
      << " at set point " << v_kl << "); ki "
      << (r.ki_in_band ? "within" : "outside") << " recommended band ["
      << r.ki_band_lo << ", " << r.ki_band_hi << "]";
  r.message = msg.str();
  return r;
}

}  // namespace cvae
