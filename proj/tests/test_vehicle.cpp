#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "evtol/vehicle.hpp"

using namespace evtol;

namespace {
constexpr double kDeg = 3.14159265358979323846 / 180.0;
const VehicleConfig kCfg{};  // defaults describe the studied vehicle
}  // namespace

// ---------------------------------------------------------------------------
// Derived configuration constants, frozen from independent hand computation.
// ---------------------------------------------------------------------------

TEST_CASE("derived geometry and rotor constants") {
  CHECK(kCfg.disk_area() == doctest::Approx(1.7671458676442586).epsilon(1e-12));
  CHECK(kCfg.prestall_slope() == doctest::Approx(4.1887902047863905).epsilon(1e-12));
  CHECK(kCfg.C_Ls() == doctest::Approx(1.1697308919809608).epsilon(1e-12));
  CHECK(kCfg.C_Dmax() == doctest::Approx(1.2352941176470589).epsilon(1e-12));
  CHECK(kCfg.sigma_e() == doctest::Approx(0.08488263631567752).epsilon(1e-12));
  CHECK(kCfg.wing_area() == doctest::Approx(9.0).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// Lift curve: linear below stall, flat-plate-like beyond, smooth blend.
// ---------------------------------------------------------------------------

TEST_CASE("lift coefficient matches frozen curve values") {
  CHECK(lift_coeff(2.0 * kDeg, kCfg) == doctest::Approx(0.1462163614976201).epsilon(1e-10));
  CHECK(lift_coeff(8.0 * kDeg, kCfg) == doctest::Approx(0.5848654459904804).epsilon(1e-10));
  // At the stall angle both branches touch, so the smooth min dips ln(2)/rho.
  CHECK(lift_coeff(16.0 * kDeg, kCfg) == doctest::Approx(1.155867948369762).epsilon(1e-10));
  CHECK(lift_coeff(30.0 * kDeg, kCfg) == doctest::Approx(0.8919404926569343).epsilon(1e-10));
  CHECK(lift_coeff(45.0 * kDeg, kCfg) == doctest::Approx(0.7672312823032352).epsilon(1e-10));
  CHECK(lift_coeff(60.0 * kDeg, kCfg) == doctest::Approx(0.5814782477965507).epsilon(1e-10));
  CHECK(std::fabs(lift_coeff(90.0 * kDeg, kCfg)) < 1e-12);
}

TEST_CASE("lift is odd, zero at zero, and saturates past 90 degrees") {
  for (double d : {3.0, 12.0, 25.0, 50.0, 80.0}) {
    CHECK(lift_coeff(-d * kDeg, kCfg) == doctest::Approx(-lift_coeff(d * kDeg, kCfg)).epsilon(1e-14));
  }
  CHECK(lift_coeff(0.0, kCfg) == 0.0);
  CHECK(lift_coeff(130.0 * kDeg, kCfg) == doctest::Approx(lift_coeff(90.0 * kDeg, kCfg)).epsilon(1e-14));
}

TEST_CASE("lift blend stays within ln2/rho of the exact branch minimum") {
  const double bound = std::log(2.0) / kCfg.rho_KS;
  for (double d = 0.5; d <= 90.0; d += 0.5) {
    const double a = d * kDeg;
    const double pre = kCfg.prestall_slope() * a;
    const double as = kCfg.alpha_s_deg * kDeg;
    const double C1 = 1.1 + 0.018 * kCfg.AR;
    const double A2 =
        (kCfg.C_Ls() - C1 * std::sin(as) * std::cos(as)) * std::sin(as) / (std::cos(as) * std::cos(as));
    const double post = (C1 / 2.0) * std::sin(2 * a) + A2 * std::cos(a) * std::cos(a) / std::sin(a);
    const double exact = std::min(pre, post);
    CHECK(lift_coeff(a, kCfg) <= exact + 1e-12);
    CHECK(lift_coeff(a, kCfg) >= exact - bound - 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Drag curve: constant section drag, measured table, trigonometric tail.
// ---------------------------------------------------------------------------

TEST_CASE("drag coefficient matches frozen curve values") {
  CHECK(drag_coeff(0.0, kCfg) == doctest::Approx(0.012000777176784525).epsilon(1e-10));
  CHECK(drag_coeff(5.0 * kDeg, kCfg) == doctest::Approx(0.01207331093440959).epsilon(1e-10));
  CHECK(drag_coeff(16.0 * kDeg, kCfg) == doctest::Approx(0.10024473274153263).epsilon(1e-10));
  CHECK(drag_coeff(20.0 * kDeg, kCfg) == doctest::Approx(0.17504563687314692).epsilon(1e-10));
  CHECK(drag_coeff(25.0 * kDeg, kCfg) == doctest::Approx(0.27856463576192136).epsilon(1e-10));
  CHECK(drag_coeff(27.5 * kDeg, kCfg) == doctest::Approx(0.36300000047770725).epsilon(1e-10));
  CHECK(drag_coeff(40.0 * kDeg, kCfg) == doctest::Approx(0.6149246170916791).epsilon(1e-10));
  CHECK(drag_coeff(90.0 * kDeg, kCfg) == doctest::Approx(1.2352941176470589).epsilon(1e-10));
}

TEST_CASE("drag stays within 0.005 of every measured table point") {
  const double a_deg[] = {16.0, 20.0, 25.0, 27.5};
  const double cd[] = {0.100, 0.175, 0.275, 0.363};
  for (int i = 0; i < 4; ++i) {
    CHECK(std::fabs(drag_coeff(a_deg[i] * kDeg, kCfg) - cd[i]) < 0.005);
  }
}

TEST_CASE("drag is even, bounded by the flat-plate maximum, and monotone after stall") {
  for (double d : {4.0, 18.0, 26.0, 45.0, 75.0}) {
    CHECK(drag_coeff(-d * kDeg, kCfg) == doctest::Approx(drag_coeff(d * kDeg, kCfg)).epsilon(1e-14));
  }
  double prev = drag_coeff(16.0 * kDeg, kCfg);
  for (double d = 16.5; d <= 90.0; d += 0.5) {
    const double cur = drag_coeff(d * kDeg, kCfg);
    CHECK(cur >= prev - 1e-12);
    CHECK(cur <= kCfg.C_Dmax() + std::log(2.0) / kCfg.rho_KS);
    prev = cur;
  }
  CHECK(drag_coeff(120.0 * kDeg, kCfg) == doctest::Approx(drag_coeff(90.0 * kDeg, kCfg)).epsilon(1e-14));
}

// ---------------------------------------------------------------------------
// Momentum-theory propulsion.
// ---------------------------------------------------------------------------

TEST_CASE("disk power at static thrust matches hand computation") {
  // T = 889 N, V_perp = 0: P = kappa*T*sqrt(T/(2 rho A))
  CHECK(disk_power_from_thrust(889.0, 0.0, kCfg) == doctest::Approx(15286.73178142885).epsilon(1e-10));
  CHECK(disk_power_from_thrust(500.0, 20.0, kCfg) == doctest::Approx(12807.676697499675).epsilon(1e-10));
  CHECK(disk_power_from_thrust(0.0, 10.0, kCfg) == 0.0);
}

TEST_CASE("power-to-thrust inversion round-trips against the forward model") {
  for (double T : {5.0, 100.0, 889.0, 2500.0, 20000.0}) {
    for (double V : {0.0, 3.0, 25.0, 70.0}) {
      const double P = disk_power_from_thrust(T, V, kCfg);
      const double T2 = thrust_from_power(P, V, kCfg);
      CHECK(T2 == doctest::Approx(T).epsilon(1e-7));
    }
  }
  CHECK(thrust_from_power(0.0, 10.0, kCfg) == 0.0);
  CHECK(thrust_from_power(-5.0, 10.0, kCfg) == 0.0);
}

TEST_CASE("induced velocity defaults to the momentum-consistent disk value") {
  CHECK(induced_velocity(889.0, 0.0, kCfg) == doctest::Approx(14.32951985510766).epsilon(1e-12));
  CHECK(induced_velocity(500.0, 20.0, kCfg) == doctest::Approx(4.679461162499459).epsilon(1e-12));
  VehicleConfig doubled = kCfg;
  doubled.momentum_consistent = false;
  CHECK(induced_velocity(889.0, 0.0, doubled) == doctest::Approx(28.65903971021532).epsilon(1e-12));
  CHECK(induced_velocity(500.0, 20.0, doubled) == doctest::Approx(19.358922324998918).epsilon(1e-12));
  // The doubled (far-field) variant is inconsistent at zero thrust: it leaves
  // half the inflow as wash.  The disk value recovers zero.
  CHECK(induced_velocity(0.0, 20.0, doubled) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(induced_velocity(0.0, 20.0, kCfg) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("profile power matches hand computation and grows with edgewise speed") {
  CHECK(profile_power(0.0, kCfg) == doctest::Approx(1055.9968295948922).epsilon(1e-12));
  CHECK(profile_power(30.0, kCfg) == doctest::Approx(1293.2342968827775).epsilon(1e-12));
  CHECK(profile_power(-30.0, kCfg) == profile_power(30.0, kCfg));
}

TEST_CASE("blade pitch schedule is linear in speed and clamps at the top") {
  CHECK(blade_pitch(0.0, kCfg) == 0.0);
  CHECK(blade_pitch(33.5, kCfg) == doctest::Approx(17.5 * kDeg).epsilon(1e-12));
  CHECK(blade_pitch(67.0, kCfg) == doctest::Approx(35.0 * kDeg).epsilon(1e-12));
  CHECK(blade_pitch(120.0, kCfg) == doctest::Approx(35.0 * kDeg).epsilon(1e-12));
}

TEST_CASE("propeller normal force vanishes without incidence or flow") {
  CHECK(prop_normal_force(500.0, 300.0, 0.0, 0.2, kCfg) == 0.0);  // aligned inflow
  CHECK(prop_normal_force(500.0, 0.0, 1.0, 0.2, kCfg) == 0.0);    // hover: no edgewise q
  CHECK(prop_normal_force(0.0, 0.0, 1.0, 0.2, kCfg) == 0.0);
  const double n = prop_normal_force(500.0, 300.0, std::tan(30.0 * kDeg), 10.0 * kDeg, kCfg);
  CHECK(n == doctest::Approx(37.25187194919744).epsilon(1e-12));
  // sign follows the incidence direction
  CHECK(prop_normal_force(500.0, 300.0, -std::tan(30.0 * kDeg), 10.0 * kDeg, kCfg) ==
        doctest::Approx(-n).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// Effective freestream and induced drag.
// ---------------------------------------------------------------------------

TEST_CASE("effective freestream decomposition matches hand computation") {
  const auto e = effective_freestream(30.0, 2.0, 20.0 * kDeg, 5.0, kCfg);
  CHECK(e.u == doctest::Approx(12.13998954134188).epsilon(1e-12));
  CHECK(e.w == doctest::Approx(27.506738336925913).epsilon(1e-12));
  CHECK(e.alpha_inf == doctest::Approx(1.1551623126202069).epsilon(1e-12));
  CHECK(e.alpha_efs == doctest::Approx(1.0135503062515145).epsilon(1e-12));
  CHECK(e.V_efs == doctest::Approx(32.40987342482872).epsilon(1e-12));
}

TEST_CASE("slipstream pushes the effective incidence toward the chord") {
  const auto none = effective_freestream(10.0, 0.0, 30.0 * kDeg, 0.0, kCfg);
  const auto washed = effective_freestream(10.0, 0.0, 30.0 * kDeg, 20.0, kCfg);
  CHECK(std::fabs(washed.alpha_efs) < std::fabs(none.alpha_efs));
  CHECK(none.alpha_efs == none.alpha_inf);
}

TEST_CASE("induced drag matches the documented example") {
  // two wings, 3556 N each at q = 500 Pa: 2 L^2 / (0.68 pi q b^2)
  CHECK(induced_drag(3556.0, 500.0, kCfg) == doctest::Approx(657.6914707415938).epsilon(1e-12));
  CHECK(induced_drag(1000.0, 0.0, kCfg) == 0.0);
}

// ---------------------------------------------------------------------------
// Force assembly and the dynamics step, against an independent transcription.
// ---------------------------------------------------------------------------

TEST_CASE("force assembly reproduces independently computed state A") {
  VehicleState s;
  s.vx = 30.0;
  s.vy = 2.0;
  const ControlInput u{2.5e5, 20.0 * kDeg};
  const auto f = assemble_forces(s, u, kCfg);
  CHECK(f.thrust_total == doctest::Approx(8568.457191367059).epsilon(1e-7));
  CHECK(f.v_i == doctest::Approx(10.78913601322508).epsilon(1e-7));
  CHECK(f.efs.alpha_inf == doctest::Approx(1.1551623126202069).epsilon(1e-10));
  CHECK(f.efs.alpha_efs == doctest::Approx(0.8759112372646973).epsilon(1e-7));
  CHECK(f.efs.V_efs == doctest::Approx(35.8101305866539).epsilon(1e-7));
  CHECK(f.lift_wings == doctest::Approx(10083.588228966424).epsilon(1e-6));
  CHECK(f.drag_wings == doctest::Approx(12140.115434685982).epsilon(1e-6));
  CHECK(f.drag_induced == doctest::Approx(841.6296382794106).epsilon(1e-6));
  CHECK(f.drag_fuse == doctest::Approx(193.795).epsilon(1e-12));
  CHECK(f.normal_force_total == doctest::Approx(2500.3014839578004).epsilon(1e-6));
  CHECK(f.beta_rad == doctest::Approx(0.2741289006888396).epsilon(1e-12));
  CHECK(f.ax == doctest::Approx(-19.933381887278067).epsilon(1e-6));
  CHECK(f.ay == doctest::Approx(9.869893243079305).epsilon(1e-6));
}

TEST_CASE("force assembly reproduces independently computed state B") {
  VehicleState s;
  s.vx = 5.0;
  s.vy = -1.0;
  const ControlInput u{2.0e5, 60.0 * kDeg};
  const auto f = assemble_forces(s, u, kCfg);
  CHECK(f.thrust_total == doctest::Approx(8416.846345130296).epsilon(1e-7));
  CHECK(f.v_i == doctest::Approx(13.790848370665493).epsilon(1e-7));
  CHECK(f.efs.alpha_efs == doctest::Approx(0.18874987422211634).epsilon(1e-7));
  CHECK(f.lift_wings == doctest::Approx(2805.2974705496217).epsilon(1e-6));
  CHECK(f.drag_wings == doctest::Approx(340.9555806032258).epsilon(1e-6));
  CHECK(f.normal_force_total == doctest::Approx(26.58141176549847).epsilon(1e-6));
  CHECK(f.ax == doctest::Approx(8.312458815499191).epsilon(1e-6));
  CHECK(f.ay == doctest::Approx(-0.4687457173124976).epsilon(1e-6));
}

TEST_CASE("force assembly under the doubled induced velocity (state A)") {
  VehicleState s;
  s.vx = 30.0;
  s.vy = 2.0;
  const ControlInput u{2.5e5, 20.0 * kDeg};
  VehicleConfig doubled = kCfg;
  doubled.momentum_consistent = false;
  const auto f = assemble_forces(s, u, doubled);
  CHECK(f.thrust_total == doctest::Approx(8568.457191367059).epsilon(1e-7));
  CHECK(f.v_i == doctest::Approx(27.648266797121103).epsilon(1e-7));
  CHECK(f.efs.alpha_efs == doctest::Approx(0.6048821331307302).epsilon(1e-7));
  CHECK(f.efs.V_efs == doctest::Approx(48.37071424313837).epsilon(1e-7));
  CHECK(f.lift_wings == doctest::Approx(22008.125771874835).epsilon(1e-6));
  CHECK(f.drag_wings == doctest::Approx(15363.736352702927).epsilon(1e-6));
  CHECK(f.drag_induced == doctest::Approx(2197.3727944522734).epsilon(1e-6));
  CHECK(f.ax == doctest::Approx(-34.31111886838413).epsilon(1e-6));
  CHECK(f.ay == doctest::Approx(14.96398843085059).epsilon(1e-6));
}

TEST_CASE("printed lift sign flips only the vertical lift contribution") {
  VehicleState s;
  s.vx = 30.0;
  s.vy = 2.0;
  const ControlInput u{2.5e5, 20.0 * kDeg};
  VehicleConfig printed = kCfg;
  printed.momentum_consistent = false;  // pair with the oracle set above
  printed.lift_sign_as_printed = true;
  const auto f = assemble_forces(s, u, printed);
  CHECK(f.ay == doctest::Approx(-34.559190068141355).epsilon(1e-6));
  CHECK(f.ax == doctest::Approx(-34.31111886838413).epsilon(1e-6));  // unchanged
}

TEST_CASE("zero power at rest gives pure free fall") {
  VehicleState s;
  s.y = 100.0;
  const auto f = assemble_forces(s, ControlInput{0.0, 0.0}, kCfg);
  CHECK(f.thrust_total == 0.0);
  CHECK(f.ax == 0.0);
  CHECK(f.ay == doctest::Approx(-kCfg.gravity).epsilon(1e-14));
  const auto n = step_dynamics(s, ControlInput{0.0, 0.0}, 0.1, kCfg);
  CHECK(n.y == 100.0);  // position uses the pre-update (zero) velocity
  CHECK(n.vy == doctest::Approx(-0.980665).epsilon(1e-14));
  CHECK(n.t == doctest::Approx(0.1));
}

TEST_CASE("positions integrate pre-update velocities") {
  VehicleState s;
  s.x = 0.0;
  s.y = 10.0;
  s.vx = 3.0;
  s.vy = -1.0;
  const auto n = step_dynamics(s, ControlInput{2.2e5, 0.3}, 0.1, kCfg);
  CHECK(n.x == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(n.y == doctest::Approx(9.9).epsilon(1e-14));
}

TEST_CASE("profile power draw reduces available disk power") {
  VehicleState s;
  s.vx = 30.0;  // strong edgewise flow at theta=0
  ForceBreakdown f;
  step_dynamics(s, ControlInput{1.0e4, 0.0}, 0.1, kCfg, &f);
  // eta*P/n = 1125 W per prop, profile power ~1293 W: disk power clamps to zero
  CHECK(f.disk_power_clamped);
  CHECK(f.thrust_total == 0.0);
}
