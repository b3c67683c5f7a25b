#pragma once

#include <optional>
#include <string>
#include <variant>

namespace cvae {

// Tracking error fed back to a controller: set point minus the sampled
// value (KL divergence or total correlation), in nats. Construction rejects
// non-finite values because those always mean the training run diverged.
struct ControlError {
  double value;
  long step;

  ControlError(double value, long step);
};

// Nonlinear PI law for the KL weight:
//
//   beta(t) = clamp(P(t) + I(t) + beta_min, beta_min, beta_max)
//   P(t)    = kp / (1 + exp(e(t)))
//   I(t)    = I(t-1) - ki * e(t)
//
// Anti-windup by conditional integration: saturation is judged on the
// previous *unclamped* output, and while it sits outside
// [beta_min, beta_max] the integral accepts only updates directed back into
// range. Before the first step the loop counts as unsaturated.
class PiController {
 public:
  PiController(double kp, double ki, double beta_min, double beta_max);

  // Advances one step and returns the clamped weight beta(t).
  double step(const ControlError& error);

  // Weight to apply before any feedback has been observed. Matches an
  // initial "no penalty" batch; not constrained to [beta_min, beta_max].
  double initial_output() const { return 0.0; }

  double kp() const { return kp_; }
  double ki() const { return ki_; }
  double beta_min() const { return beta_min_; }
  double beta_max() const { return beta_max_; }
  double integral() const { return integral_; }
  double last_beta() const { return last_beta_; }
  long step_count() const { return step_count_; }
  long saturation_count() const { return saturation_count_; }

  // Test-only switch: with anti-windup off the integral keeps accumulating
  // through saturation, which is the failure mode the freeze exists to avoid.
  void set_anti_windup(bool enabled) { anti_windup_ = enabled; }
  bool anti_windup() const { return anti_windup_; }

  std::string to_json() const;
  static PiController from_json(const std::string& json_text);

 private:
  double kp_, ki_, beta_min_, beta_max_;
  double integral_ = 0.0;
  double last_beta_ = 0.0;
  std::optional<double> last_unclamped_;
  long step_count_ = 0;
  long saturation_count_ = 0;
  bool anti_windup_ = true;
};

// Gradient ascent on the multiplier of the KL equality constraint:
// lambda(t) = lambda(t-1) - alpha * e(t). No P term, no clamping; with
// lambda(0) = 0 this equals the PI integral term when alpha = ki.
class LagrangeController {
 public:
  explicit LagrangeController(double alpha, double lambda0 = 0.0);

  double step(const ControlError& error);
  double initial_output() const { return lambda_; }

  double alpha() const { return alpha_; }
  double lambda_value() const { return lambda_; }
  long step_count() const { return step_count_; }

  std::string to_json() const;
  static LagrangeController from_json(const std::string& json_text);

 private:
  double alpha_;
  double lambda_;
  long step_count_ = 0;
};

// Constant weight regardless of error: beta = 1 is the plain VAE, larger
// values give the fixed high-penalty regime.
class FixedBetaController {
 public:
  explicit FixedBetaController(double beta);

  double step(const ControlError& error);
  double initial_output() const { return beta_; }
  double beta() const { return beta_; }
  long step_count() const { return step_count_; }

  std::string to_json() const;
  static FixedBetaController from_json(const std::string& json_text);

 private:
  double beta_;
  long step_count_ = 0;
};

using Controller =
    std::variant<PiController, LagrangeController, FixedBetaController>;

double controller_step(Controller& c, const ControlError& e);
double controller_initial_output(const Controller& c);
std::string controller_to_json(const Controller& c);
Controller controller_from_json(const std::string& json_text);

// Advisory check of the gain guidelines: kp small enough that the P term
// stays below epsilon at maximum error (kp <= (1 + exp(v_kl)) * epsilon),
// and ki within the band that keeps per-step corrections gentle.
struct GainReport {
  bool kp_ok;
  double kp_limit;
  bool ki_in_band;
  double ki_band_lo;
  double ki_band_hi;
  std::string message;
};

GainReport validate_gains(double kp, double ki, double v_kl, double epsilon);

}  // namespace cvae
