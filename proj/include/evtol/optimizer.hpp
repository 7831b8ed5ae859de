#pragma once
// Minimum-energy reference trajectories: cubic-spline control schedules whose
// 41 design variables (20 power points, 20 tilt points, takeoff duration) are
// optimized by a rank-mu evolution strategy inside an augmented-Lagrangian
// loop handling the terminal, ground, and optional path constraints.

#include <array>
#include <cstdint>
#include <vector>

#include "evtol/bspline.hpp"
#include "evtol/env.hpp"

namespace evtol {

struct FlightCondition {
  double alpha_max_deg = 15.0;  // path limit on |alpha_EFS|
  double a_max_g = 0.4;         // path limit on acceleration magnitude
  double k_w = 1.0;
  double eta = 0.9;
  double S_ref = 1.0;
};

// Latin hypercube over the flight-condition box:
// alpha_max [10,15] deg, a_max [0.2,0.4] g, k_w [0.3,1], eta [0.7,0.9], S_ref [0.9,1].
std::vector<FlightCondition> lhs_conditions(int n, std::uint64_t seed);

// Design vector, all coordinates normalized to [0,1].
struct RefDesign {
  std::vector<double> p01;   // spline control points for power
  std::vector<double> th01;  // spline control points for tilt
  double T01 = 0.0;          // maps onto (T_min, T_max]

  std::vector<double> flat() const;
  static RefDesign unflat(const std::vector<double>& x, int n_ctrl);
};

struct OptimizerConfig {
  int n_ctrl = 20;
  double T_min = 5.0;   // exclusive
  double T_max = 40.0;
  int population = 32;
  int max_rollouts = 20000;
  double penalty_init = 10.0;
  double penalty_growth = 2.0;
  double penalty_max = 1e4;  // saturation; multipliers, not the penalty, do the fine work
  int inner_gens = 12;        // ES generations per augmented-Lagrangian iteration
  double sigma0 = 0.2;
  bool path_constraints = true;
  // feasibility thresholds, natural units
  double tol_alt = 1e-3;      // m
  double tol_vx = 1e-3;       // m/s
  double tol_ground = 1e-6;   // m
  double tol_alpha = 1e-3;    // rad
  double tol_accel = 1e-3;    // g
  // initial guess
  double init_power_W = 2.6e5;
  double init_theta_hi_deg = 80.0;
  double init_T = 25.0;

  double duration_of(double T01) const { return T_min + T01 * (T_max - T_min); }
};

struct RolloutResult {
  double energy_Wh = 0.0;
  double y_final = 0.0;
  double vx_final = 0.0;
  double min_y = 0.0;
  double max_alpha_efs = 0.0;  // rad
  double max_accel_g = 0.0;
  int steps = 0;
  bool finite = true;
  VehicleState final_state;
};

// Open-loop rollout of a spline schedule on the environment physics; spline
// values are normalized controls, denormalized through the env bounds.
RolloutResult rollout_schedule(const RefDesign& d, const OptimizerConfig& ocfg,
                               const EnvConfig& env_cfg);

// Replays an explicit normalized control sequence (one entry per step).
RolloutResult rollout_controls(const std::vector<std::array<double, 2>>& controls01,
                               const EnvConfig& env_cfg);

struct Residuals {
  double alt = 0.0;     // max(0, target_y - y_final), m
  double vx = 0.0;      // max(0, target_vx - vx_final), m/s
  double ground = 0.0;  // max(0, -min_y), m
  double alpha = 0.0;   // max(0, max_alpha - alpha_max), rad
  double accel = 0.0;   // max(0, max_accel - a_max), g
  double max_scaled() const;
};

Residuals residuals_of(const RolloutResult& r, const FlightCondition& cond,
                       const OptimizerConfig& ocfg, const EnvConfig& env_cfg);
bool is_feasible(const Residuals& res, const OptimizerConfig& ocfg);

struct ReferenceResult {
  RefDesign design;
  RolloutResult rollout;
  Residuals residuals;
  bool feasible = false;
  int rollouts_used = 0;
  double duration = 0.0;  // seconds
};

// EnvConfig carries the vehicle; the flight condition's k_w/eta/S_ref are
// applied on top of it before optimization.
ReferenceResult optimize_reference(const FlightCondition& cond, const OptimizerConfig& ocfg,
                                   EnvConfig env_cfg, std::uint64_t seed);

EnvConfig apply_condition(EnvConfig env_cfg, const FlightCondition& cond);

}  // namespace evtol
