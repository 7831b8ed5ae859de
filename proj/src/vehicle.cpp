#include "evtol/vehicle.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace evtol {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

// Empirical section drag between stall and the end of the measured range.
constexpr std::array<double, 4> kDragAlphaDeg = {16.0, 20.0, 25.0, 27.5};
constexpr std::array<double, 4> kDragCd = {0.100, 0.175, 0.275, 0.363};

double ks_max(double a, double b, double rho) {
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-rho * std::abs(a - b))) / rho;
}

double ks_min(double a, double b, double rho) {
  const double lo = std::min(a, b);
  return lo - std::log1p(std::exp(-rho * std::abs(a - b))) / rho;
}

// Monotone cubic (Fritsch-Carlson) through the four drag points, with linear
// extrapolation outside the table.  Input in degrees.
double drag_table_spline(double a_deg) {
  constexpr int n = 4;
  static const std::array<double, n> d = [] {
    std::array<double, n> h{}, s{}, m{};
    for (int i = 0; i < n - 1; ++i) {
      h[i] = kDragAlphaDeg[i + 1] - kDragAlphaDeg[i];
      s[i] = (kDragCd[i + 1] - kDragCd[i]) / h[i];
    }
    for (int i = 1; i < n - 1; ++i) {
      if (s[i - 1] * s[i] <= 0.0) {
        m[i] = 0.0;
      } else {
        const double w1 = 2.0 * h[i] + h[i - 1];
        const double w2 = h[i] + 2.0 * h[i - 1];
        m[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
      }
    }
    m[0] = ((2.0 * h[0] + h[1]) * s[0] - h[0] * s[1]) / (h[0] + h[1]);
    if (m[0] * s[0] <= 0.0)
      m[0] = 0.0;
    else if (std::abs(m[0]) > 3.0 * std::abs(s[0]))
      m[0] = 3.0 * s[0];
    m[n - 1] = ((2.0 * h[n - 2] + h[n - 3]) * s[n - 2] - h[n - 2] * s[n - 3]) / (h[n - 2] + h[n - 3]);
    if (m[n - 1] * s[n - 2] <= 0.0)
      m[n - 1] = 0.0;
    else if (std::abs(m[n - 1]) > 3.0 * std::abs(s[n - 2]))
      m[n - 1] = 3.0 * s[n - 2];
    return m;
  }();

  if (a_deg <= kDragAlphaDeg[0]) return kDragCd[0] + d[0] * (a_deg - kDragAlphaDeg[0]);
  if (a_deg >= kDragAlphaDeg[n - 1])
    return kDragCd[n - 1] + d[n - 1] * (a_deg - kDragAlphaDeg[n - 1]);
  int i = 0;
  while (a_deg > kDragAlphaDeg[i + 1]) ++i;
  const double h = kDragAlphaDeg[i + 1] - kDragAlphaDeg[i];
  const double t = (a_deg - kDragAlphaDeg[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  return h00 * kDragCd[i] + h10 * h * d[i] + h01 * kDragCd[i + 1] + h11 * h * d[i + 1];
}

}  // namespace

double VehicleConfig::disk_area() const { return kPi * R_m * R_m; }
double VehicleConfig::prestall_slope() const { return 2.0 * kPi / (1.0 + 2.0 / AR); }
double VehicleConfig::C_Ls() const { return prestall_slope() * alpha_s_deg * kDeg; }
double VehicleConfig::C_Dmax() const { return (1.0 + 0.065 * AR) / (0.9 + t_over_c); }
double VehicleConfig::sigma_e() const { return 2.0 * blades * c_b_m / (3.0 * kPi * R_m); }
double VehicleConfig::wing_area() const { return S_ref * b_m * c_m; }

double lift_coeff(double alpha, const VehicleConfig& cfg) {
  const double sign = alpha < 0.0 ? -1.0 : 1.0;
  double a = std::abs(alpha);
  if (a > kPi / 2.0) a = kPi / 2.0;  // saturate outside the modeled range
  if (a < 1e-12) return 0.0;

  const double slope = cfg.prestall_slope();
  const double pre = slope * a;

  const double as = cfg.alpha_s_deg * kDeg;
  const double C1 = 1.1 + 0.018 * cfg.AR;
  const double A1 = C1 / 2.0;
  const double sas = std::sin(as), cas = std::cos(as);
  const double A2 = (cfg.C_Ls() - C1 * sas * cas) * sas / (cas * cas);
  const double sa = std::sin(a), ca = std::cos(a);
  const double post = A1 * std::sin(2.0 * a) + A2 * ca * ca / sa;

  return sign * ks_min(pre, post, cfg.rho_KS);
}

double drag_coeff(double alpha, const VehicleConfig& cfg) {
  double a = std::abs(alpha);
  if (a > kPi / 2.0) a = kPi / 2.0;
  const double a_deg = a / kDeg;

  const double B1 = cfg.C_Dmax();
  const double a_end = kDragAlphaDeg.back() * kDeg;
  const double cd_end = kDragCd.back();
  const double B2 = (cd_end - B1 * std::sin(a_end)) / std::cos(a_end);
  const double post = B1 * std::sin(a) + B2 * std::cos(a);

  const double table = drag_table_spline(a_deg);

  // The measured curve and the post-range branch touch at the last table
  // point, so a plain smooth-extremum there would shift that point by
  // ln(2)/rho.  Blend their slopes instead: logistic weights in alpha with
  // the same sharpness, which keeps every table value while smoothing the
  // junction.  The prestall constant crosses the measured curve well below
  // stall and takes a standard smooth-max.
  const double sw = 1.0 / (1.0 + std::exp(-cfg.rho_KS * (a - a_end)));
  const double stalled = (1.0 - sw) * table + sw * post;

  return ks_max(cfg.prestall_cd, stalled, cfg.rho_KS);
}

double disk_power_from_thrust(double T, double V_perp, const VehicleConfig& cfg) {
  if (T < 0.0) throw std::invalid_argument("disk_power_from_thrust: thrust must be >= 0");
  if (V_perp < 0.0) throw std::invalid_argument("disk_power_from_thrust: V_perp must be >= 0");
  const double A = cfg.disk_area();
  const double s = std::sqrt(V_perp * V_perp / 4.0 + T / (2.0 * cfg.rho_air * A));
  return T * V_perp + cfg.kappa * T * (-V_perp / 2.0 + s);
}

double thrust_from_power(double P_disk, double V_perp, const VehicleConfig& cfg) {
  if (V_perp < 0.0) throw std::invalid_argument("thrust_from_power: V_perp must be >= 0");
  if (P_disk <= 0.0) return 0.0;

  const double A = cfg.disk_area();
  const double inv2rA = 1.0 / (2.0 * cfg.rho_air * A);
  auto residual = [&](double T) { return disk_power_from_thrust(T, V_perp, cfg) - P_disk; };
  auto residual_d = [&](double T) {
    const double s = std::sqrt(V_perp * V_perp / 4.0 + T * inv2rA);
    return V_perp + cfg.kappa * (-V_perp / 2.0 + s) + cfg.kappa * T * inv2rA / (2.0 * s);
  };

  // bracket the root, then Newton with bisection fallback
  double lo = 0.0, hi = 1.2 * cfg.mass_kg * cfg.gravity / cfg.n_props;
  int expand = 0;
  while (residual(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++expand > 200)
      throw SolverError("thrust_from_power: cannot bracket root, P=" + std::to_string(P_disk) +
                        " V=" + std::to_string(V_perp));
  }

  double T = 1.2 * cfg.mass_kg * cfg.gravity / cfg.n_props;  // initial guess: 1.2x weight share
  if (T <= lo || T >= hi) T = 0.5 * (lo + hi);
  const double tol = 1e-10 * P_disk;
  for (int it = 0; it < 100; ++it) {
    const double r = residual(T);
    if (std::abs(r) < tol) return T;
    if (r > 0.0)
      hi = T;
    else
      lo = T;
    const double d = residual_d(T);
    double next = d > 0.0 ? T - r / d : -1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    T = next;
  }
  if (std::abs(residual(T)) < 1e-8 * P_disk) return T;  // slow but acceptable convergence
  throw SolverError("thrust_from_power: no convergence, P=" + std::to_string(P_disk) +
                    " V=" + std::to_string(V_perp) + " T=" + std::to_string(T));
}

double induced_velocity(double T, double V_perp, const VehicleConfig& cfg) {
  if (T < 0.0) throw std::invalid_argument("induced_velocity: thrust must be >= 0");
  const double s = std::sqrt(V_perp * V_perp / 4.0 + T / (2.0 * cfg.rho_air * cfg.disk_area()));
  const double coeff = cfg.momentum_consistent ? 1.0 : 2.0;
  return -V_perp / 2.0 + coeff * s;
}

double profile_power(double V_par, const VehicleConfig& cfg) {
  const double mu = std::abs(V_par) / (cfg.Omega * cfg.R_m);
  const double C_Pp = cfg.sigma * cfg.C_d0p / 8.0 * (1.0 + 4.6 * mu * mu);
  const double R3 = cfg.R_m * cfg.R_m * cfg.R_m;
  return C_Pp * cfg.rho_air * cfg.disk_area() * R3 * cfg.Omega * cfg.Omega * cfg.Omega;
}

double blade_pitch(double speed, const VehicleConfig& cfg) {
  const double f = std::clamp(speed / cfg.v_beta_max, 0.0, 1.0);
  return f * cfg.beta_max_deg * kDeg;
}

double prop_normal_force(double T, double q_perp, double tan_alpha_in, double beta_rad,
                         const VehicleConfig& cfg) {
  const double se = cfg.sigma_e();
  const double QA = q_perp * cfg.disk_area();
  // f*q_perp*A with f = 1 + (sqrt(1+Tc)-1)/2 + Tc/(4(2+Tc)), Tc = T/(q_perp*A),
  // multiplied through so the hover limit QA -> 0 is finite.
  double G = 0.0;
  if (QA > 0.0 || T > 0.0) {
    G = QA + (std::sqrt(QA * (QA + T)) - QA) / 2.0;
    const double denom = 2.0 * QA + T;
    if (denom > 0.0) G += T * QA / (4.0 * denom);
  }
  const double C = 4.25 * se * std::sin(beta_rad + cfg.beta_offset_deg * kDeg) / (1.0 + 2.0 * se);
  return C * G * tan_alpha_in;
}

EffectiveFreestream effective_freestream(double vx, double vy, double theta, double v_i,
                                         const VehicleConfig& cfg) {
  EffectiveFreestream e;
  const double st = std::sin(theta), ct = std::cos(theta);
  e.u = vx * st + vy * ct;
  e.w = vx * ct - vy * st;
  e.alpha_inf = (e.u == 0.0 && e.w == 0.0) ? 0.0 : std::atan2(e.w, e.u);
  const double ue = e.u + cfg.k_w * v_i;
  e.alpha_efs = (ue == 0.0 && e.w == 0.0) ? 0.0 : std::atan2(e.w, ue);
  e.V_efs = std::sqrt(e.w * e.w + ue * ue);
  return e;
}

double induced_drag(double lift_per_wing, double q, const VehicleConfig& cfg) {
  if (q <= 0.0) return 0.0;
  return 2.0 * lift_per_wing * lift_per_wing /
         (cfg.span_eff * kPi * q * cfg.b_m * cfg.b_m);
}

ForceBreakdown assemble_forces(const VehicleState& s, const ControlInput& u,
                               const VehicleConfig& cfg) {
  ForceBreakdown f;
  f.electric_power = u.power_W;
  const double st = std::sin(u.theta_rad), ct = std::cos(u.theta_rad);
  const double u_chord = s.vx * st + s.vy * ct;
  const double w_norm = s.vx * ct - s.vy * st;
  const double V_perp = std::max(u_chord, 0.0);

  // propulsion, per propeller with the power split evenly
  f.profile_power_per_prop = profile_power(w_norm, cfg);
  const double p_elec_per = u.power_W / cfg.n_props;
  double p_disk = cfg.eta * p_elec_per - f.profile_power_per_prop;
  if (p_disk < 0.0) {
    p_disk = 0.0;
    f.disk_power_clamped = true;
  }
  f.disk_power_per_prop = p_disk;
  f.thrust_per_prop = thrust_from_power(p_disk, V_perp, cfg);
  f.thrust_total = cfg.n_props * f.thrust_per_prop;
  f.v_i = induced_velocity(f.thrust_per_prop, V_perp, cfg);

  f.efs = effective_freestream(s.vx, s.vy, u.theta_rad, f.v_i, cfg);

  const double q_efs = 0.5 * cfg.rho_air * f.efs.V_efs * f.efs.V_efs;
  const double q_inf = 0.5 * cfg.rho_air * (s.vx * s.vx + s.vy * s.vy);
  const double S = cfg.wing_area();
  const double lift_per_wing = q_efs * S * lift_coeff(f.efs.alpha_efs, cfg);
  f.lift_wings = cfg.wings * lift_per_wing;
  f.drag_induced = induced_drag(lift_per_wing, q_efs, cfg);
  f.drag_wings = cfg.wings * q_efs * S * drag_coeff(f.efs.alpha_efs, cfg) + f.drag_induced;
  f.drag_fuse = q_inf * cfg.fuse_drag_area;

  f.beta_rad = blade_pitch(std::sqrt(s.vx * s.vx + s.vy * s.vy), cfg);
  const double q_perp = 0.5 * cfg.rho_air * w_norm * w_norm;
  // inflow incidence, saturated short of 90 deg so the tangent stays finite
  const double a_in = std::min(std::atan2(std::abs(w_norm), u_chord), 89.9 * kDeg);
  const double tan_in = (w_norm < 0.0 ? -1.0 : 1.0) * std::tan(a_in);
  f.normal_force_total =
      cfg.n_props * prop_normal_force(f.thrust_per_prop, q_perp, tan_in, f.beta_rad, cfg);

  const double phi = u.theta_rad + f.efs.alpha_inf;  // freestream flight-path angle from vertical
  const double psi = u.theta_rad + f.efs.alpha_efs;  // slipstream-corrected one
  const double T = f.thrust_total, L = f.lift_wings, Dw = f.drag_wings, Df = f.drag_fuse,
               N = f.normal_force_total;
  const double lift_y = cfg.lift_sign_as_printed ? -L * std::sin(psi) : L * std::sin(psi);
  const double m = cfg.mass_kg;
  f.ax = (T * st - Df * std::sin(phi) - Dw * std::sin(psi) - L * std::cos(psi) - N * ct) / m;
  f.ay = (T * ct - Df * std::cos(phi) - Dw * std::cos(psi) + lift_y + N * st) / m - cfg.gravity;
  return f;
}

VehicleState step_dynamics(const VehicleState& s, const ControlInput& u, double dt,
                           const VehicleConfig& cfg, ForceBreakdown* out_forces) {
  const ForceBreakdown f = assemble_forces(s, u, cfg);
  if (out_forces != nullptr) *out_forces = f;
  VehicleState n;
  n.x = s.x + s.vx * dt;  // positions advance on pre-update velocities
  n.y = s.y + s.vy * dt;
  n.vx = s.vx + f.ax * dt;
  n.vy = s.vy + f.ay * dt;
  n.t = s.t + dt;
  return n;
}

}  // namespace evtol
