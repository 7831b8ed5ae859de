#pragma once
// Tandem tilt-wing vehicle model: post-stall wing aerodynamics with
// smooth-blended coefficient branches, momentum-theory propulsion with a
// power-to-thrust Newton inversion, propeller normal force, slipstream-
// corrected effective freestream, and forward-Euler point-mass dynamics.
//
// Conventions: x horizontal, y vertical (up).  theta is the wing tilt from
// vertical, so theta = 0 points the thrust line up (hover) and theta = pi/2
// points it forward (cruise).  The chordwise freestream component is
// u = vx*sin(theta) + vy*cos(theta); the chord-normal component is
// w = vx*cos(theta) - vy*sin(theta).

#include <stdexcept>
#include <string>

namespace evtol {

struct VehicleConfig {
  // wing geometry (per wing)
  double b_m = 6.0;             // span
  double c_m = 1.5;             // chord
  double AR = 4.0;              // aspect ratio
  double t_over_c = 0.12;       // airfoil thickness ratio
  int wings = 2;
  double S_ref = 1.0;           // dimensionless planform scale; area = S_ref*b*c
  double span_eff = 0.68;       // span efficiency in the induced-drag term

  // stall model
  double alpha_s_deg = 16.0;    // stall angle
  double C_Ds = 0.100;          // drag coefficient at stall (first table point)
  double prestall_cd = 0.012;   // constant section drag below stall
  double rho_KS = 50.0;         // blend sharpness for branch junctions

  // propulsion (per propeller unless noted)
  int n_props = 8;
  double R_m = 0.75;            // propeller radius
  int blades = 3;
  double c_b_m = 0.1;           // blade chord
  double Omega = 181.0;         // rotor speed, rad/s
  double sigma = 0.13;          // rotor solidity used in profile power
  double C_d0p = 0.012;         // blade profile drag coefficient
  double kappa = 1.2;           // induced power factor
  double eta = 0.9;             // electric-to-disk efficiency
  double k_w = 1.0;             // fraction of induced velocity seen by the wing
  double beta_max_deg = 35.0;   // blade pitch at and above v_beta_max
  double v_beta_max = 67.0;     // speed where the pitch schedule tops out, m/s
  double beta_offset_deg = 8.0; // pitch offset in the normal-force fit

  // body
  double mass_kg = 725.0;
  double gravity = 9.80665;
  double rho_air = 1.225;
  double fuse_drag_area = 0.35; // drag area D/q of the fuselage, m^2

  // model-fidelity switches
  bool momentum_consistent = true;   // classical disk induced velocity; false doubles the
                                     // square-root term (far-field wash at the disk)
  bool lift_sign_as_printed = false; // keep the non-perpendicular lift sign in the vertical
                                     // equation instead of the force-balance-consistent one

  double disk_area() const;
  double prestall_slope() const;      // 2*pi / (1 + 2/AR), per rad
  double C_Ls() const;                // prestall_slope * alpha_s
  double C_Dmax() const;              // (1 + 0.065*AR) / (0.9 + t/c)
  double sigma_e() const;             // 2*B*c_b / (3*pi*R)
  double wing_area() const;           // per wing
};

struct VehicleState {
  double x = 0.0;   // m
  double y = 0.0;   // m
  double vx = 0.0;  // m/s
  double vy = 0.0;  // m/s
  double t = 0.0;   // s
};

struct ControlInput {
  double power_W = 0.0;    // total commanded electric power
  double theta_rad = 0.0;  // wing tilt from vertical
};

struct EffectiveFreestream {
  double u = 0.0;          // chordwise component
  double w = 0.0;          // chord-normal component
  double alpha_inf = 0.0;  // freestream angle of attack, rad
  double alpha_efs = 0.0;  // slipstream-corrected angle of attack, rad
  double V_efs = 0.0;      // slipstream-corrected speed
};

struct ForceBreakdown {
  double thrust_total = 0.0;     // N
  double thrust_per_prop = 0.0;  // N
  double disk_power_per_prop = 0.0;
  double profile_power_per_prop = 0.0;
  double electric_power = 0.0;   // commanded, W
  bool disk_power_clamped = false;
  double v_i = 0.0;
  EffectiveFreestream efs;
  double lift_wings = 0.0;
  double drag_wings = 0.0;       // includes induced drag
  double drag_induced = 0.0;
  double drag_fuse = 0.0;
  double normal_force_total = 0.0;
  double beta_rad = 0.0;
  double ax = 0.0;               // net acceleration, m/s^2
  double ay = 0.0;
};

class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// Blended coefficient curves.  alpha in radians; lift is odd, drag even, and
// both saturate for |alpha| > pi/2.
double lift_coeff(double alpha, const VehicleConfig& cfg);
double drag_coeff(double alpha, const VehicleConfig& cfg);

// Momentum-theory propulsion, all per propeller.  V_perp >= 0 is the inflow
// normal to the disk (chordwise).
double disk_power_from_thrust(double T, double V_perp, const VehicleConfig& cfg);
double thrust_from_power(double P_disk, double V_perp, const VehicleConfig& cfg);
double induced_velocity(double T, double V_perp, const VehicleConfig& cfg);
double profile_power(double V_par, const VehicleConfig& cfg);
double blade_pitch(double speed, const VehicleConfig& cfg);  // rad

// Propeller normal force (per prop).  tan_alpha_in is tan of the inflow
// incidence; the thrust-coefficient factor is algebraically simplified so
// q_perp = 0 stays finite.
double prop_normal_force(double T, double q_perp, double tan_alpha_in, double beta_rad,
                         const VehicleConfig& cfg);

EffectiveFreestream effective_freestream(double vx, double vy, double theta, double v_i,
                                         const VehicleConfig& cfg);

// Induced drag of both wings from one wing's lift, using dynamic pressure q.
double induced_drag(double lift_per_wing, double q, const VehicleConfig& cfg);

ForceBreakdown assemble_forces(const VehicleState& s, const ControlInput& u,
                               const VehicleConfig& cfg);

// One forward-Euler step; positions integrate pre-update velocities.
VehicleState step_dynamics(const VehicleState& s, const ControlInput& u, double dt,
                           const VehicleConfig& cfg, ForceBreakdown* out_forces = nullptr);

}  // namespace evtol
