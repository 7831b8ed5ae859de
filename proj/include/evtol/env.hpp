#pragma once
// Takeoff reinforcement-learning environment around the vehicle model.
//
// Episodes run at a fixed control interval until the vehicle either violates
// safety (below ground or reversed chordwise inflow), reaches the altitude
// and speed targets, or times out -- checked in that order.  Commanded
// electric energy integrates in joules and is reported in watt-hours.

#include <array>
#include <cstdint>
#include <vector>

#include "evtol/vehicle.hpp"

namespace evtol {

enum class TerminationCause : std::uint8_t { kNone, kGround, kNegFreestream, kTookOff, kTimeout };

const char* to_string(TerminationCause c);

enum class ObsMode : std::uint8_t { kVanilla, kGuided };

struct EnvConfig {
  VehicleConfig vehicle;
  double dt = 0.1;
  double t_max = 40.0;
  double target_y = 305.0;    // m
  double target_vx = 67.0;    // m/s
  double init_y = 0.1;
  double init_vx = 0.1;
  double init_vy = 0.1;
  double p_min = 1.8e5;       // W
  double p_max = 3.11e5;      // W
  double theta_min = 0.0;     // rad
  double theta_max = 1.5707963267948966;
  // reward shaping
  double k = 0.05;
  double cc = 0.5;
  double rho_w = 2.0;
  double p_norm = 310000.0;   // W, power-cost normalizer
  double obs_padding = 7.0;   // fills proposal slots before the first proposal
  ObsMode obs_mode = ObsMode::kGuided;

  int max_steps() const { return static_cast<int>(t_max / dt + 0.5); }
};

// 7 slots in guided mode: y, vx, vy, mu_P, mu_theta, var_P, var_theta
// (proposal slots in normalized control units); 3 slots in vanilla mode.
using Observation = std::vector<double>;

struct RewardTerms {
  double r_y = 0.0;
  double r_vx = 0.0;
  double r_p = 0.0;
  double penalty = 0.0;  // terminal safety penalty, zero otherwise
  double total() const { return r_y + r_vx + r_p + penalty; }
};

struct StepResult {
  Observation obs;
  RewardTerms reward;
  bool done = false;
  TerminationCause cause = TerminationCause::kNone;
  VehicleState state;
  ForceBreakdown forces;
};

struct EpisodeRow {
  double t, x, y, vx, vy, power, theta, reward, r_y, r_vx, r_p, energy_Wh;
  std::array<double, 4> proposal{};  // mu_P, mu_theta, var_P, var_theta (guided)
};

// reward pieces exposed for direct checks (state taken after the step)
RewardTerms reward_components(double y, double vx, double power, const EnvConfig& cfg);
double terminal_penalty(double t_violation, const EnvConfig& cfg);

class TakeoffEnv {
 public:
  explicit TakeoffEnv(EnvConfig cfg);

  Observation reset();
  // Physical control step; the caller guarantees bounds (clamped defensively).
  StepResult step_control(ControlInput u);
  // Action in [-1,1]^2 mapped affinely onto the power/tilt bounds.
  StepResult step_action(double a_power, double a_theta);

  // Overwrite the proposal slots (normalized units) for the next observation.
  void set_proposal(double mu_p, double mu_th, double var_p, double var_th);

  ControlInput denormalize(double p01, double th01) const;  // [0,1]^2 -> physical
  std::array<double, 2> normalize(const ControlInput& u) const;

  Observation observe() const;
  const VehicleState& state() const { return state_; }
  double energy_J() const { return energy_J_; }
  double energy_Wh() const { return energy_J_ / 3600.0; }
  int steps() const { return steps_; }
  bool done() const { return done_; }
  TerminationCause cause() const { return cause_; }
  const EnvConfig& config() const { return cfg_; }

  void enable_logging(bool on) { logging_ = on; }
  const std::vector<EpisodeRow>& log() const { return log_; }

 private:
  EnvConfig cfg_;
  VehicleState state_;
  double energy_J_ = 0.0;
  int steps_ = 0;
  bool done_ = true;
  TerminationCause cause_ = TerminationCause::kNone;
  bool have_proposal_ = false;
  std::array<double, 4> proposal_{};
  bool logging_ = false;
  std::vector<EpisodeRow> log_;
};

}  // namespace evtol
