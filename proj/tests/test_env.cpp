#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "evtol/env.hpp"

using namespace evtol;

// ---------------------------------------------------------------------------
// Reward shaping, frozen from independent hand computation.
// ---------------------------------------------------------------------------

TEST_CASE("reward terms vanish exactly at the targets") {
  const EnvConfig cfg;
  const auto r = reward_components(305.0, 67.0, 310000.0, cfg);
  CHECK(r.r_y == 0.0);
  CHECK(r.r_vx == 0.0);
  CHECK(r.r_p == doctest::Approx(-1.0 / 30.0).epsilon(1e-14));
  CHECK(r.total() == doctest::Approx(-1.0 / 30.0).epsilon(1e-14));
}

TEST_CASE("altitude and speed shaping match frozen values") {
  const EnvConfig cfg;
  // Full deviation collapses algebraically to -k / (3 (rho_w + 1)).
  CHECK(reward_components(0.0, 67.0, 0.0, cfg).r_y ==
        doctest::Approx(-1.0 / 180.0).epsilon(1e-14));
  CHECK(reward_components(152.5, 67.0, 0.0, cfg).r_y ==
        doctest::Approx(-0.003123202782698878).epsilon(1e-12));
  CHECK(reward_components(305.0, 33.5, 0.0, cfg).r_vx ==
        doctest::Approx(-0.003123202782698878).epsilon(1e-12));
  // Overshoot is penalized symmetrically.
  CHECK(reward_components(457.5, 67.0, 0.0, cfg).r_y ==
        doctest::Approx(-0.003123202782698878).epsilon(1e-12));
}

TEST_CASE("power cost is linear in commanded power") {
  const EnvConfig cfg;
  CHECK(reward_components(0.0, 0.0, 180000.0, cfg).r_p ==
        doctest::Approx(-0.01935483870967742).epsilon(1e-14));
  CHECK(reward_components(0.0, 0.0, 311000.0, cfg).r_p ==
        doctest::Approx(-0.03344086021505376).epsilon(1e-14));
  CHECK(reward_components(0.0, 0.0, 0.0, cfg).r_p == 0.0);
}

TEST_CASE("terminal safety penalty scales with remaining episode time") {
  const EnvConfig cfg;
  CHECK(terminal_penalty(0.0, cfg) == doctest::Approx(-20.0).epsilon(1e-14));
  CHECK(terminal_penalty(25.0, cfg) == doctest::Approx(-7.5).epsilon(1e-14));
  CHECK(terminal_penalty(40.0, cfg) == 0.0);
}

// ---------------------------------------------------------------------------
// Episode mechanics.
// ---------------------------------------------------------------------------

TEST_CASE("reset restores the initial state and clears the episode") {
  TakeoffEnv env{EnvConfig{}};
  auto obs = env.reset();
  CHECK(env.state().y == 0.1);
  CHECK(env.state().vx == 0.1);
  CHECK(env.state().vy == 0.1);
  CHECK(env.state().t == 0.0);
  CHECK(env.energy_J() == 0.0);
  CHECK(env.steps() == 0);
  CHECK_FALSE(env.done());
  CHECK(env.cause() == TerminationCause::kNone);
  CHECK(obs.size() == 7);
}

TEST_CASE("guided observations pad proposal slots until one is set") {
  TakeoffEnv env{EnvConfig{}};
  auto obs = env.reset();
  CHECK(obs[0] == 0.1);
  CHECK(obs[1] == 0.1);
  CHECK(obs[2] == 0.1);
  for (int i = 3; i < 7; ++i) CHECK(obs[i] == 7.0);
  env.set_proposal(0.3, 0.4, 0.01, 0.02);
  obs = env.observe();
  CHECK(obs[3] == 0.3);
  CHECK(obs[4] == 0.4);
  CHECK(obs[5] == 0.01);
  CHECK(obs[6] == 0.02);
}

TEST_CASE("vanilla observations carry only the kinematic state") {
  EnvConfig cfg;
  cfg.obs_mode = ObsMode::kVanilla;
  TakeoffEnv env{cfg};
  auto obs = env.reset();
  CHECK(obs.size() == 3);
  CHECK(obs[0] == 0.1);
}

TEST_CASE("control bounds clamp both commanded power and tilt") {
  TakeoffEnv env{EnvConfig{}};
  env.reset();
  auto res = env.step_control(ControlInput{9.9e5, 3.0});
  CHECK(res.forces.electric_power == doctest::Approx(3.11e5));
  CHECK(env.energy_J() == doctest::Approx(3.11e4).epsilon(1e-12));  // P_max * dt
}

TEST_CASE("action interface maps [-1,1]^2 affinely onto the control box") {
  EnvConfig cfg;
  TakeoffEnv env{cfg};
  env.enable_logging(true);
  env.reset();
  env.step_action(-1.0, -1.0);
  env.step_action(1.0, 1.0);
  env.step_action(0.0, 0.0);
  const auto& log = env.log();
  REQUIRE(log.size() == 3);
  CHECK(log[0].power == doctest::Approx(1.8e5));
  CHECK(log[0].theta == doctest::Approx(0.0));
  CHECK(log[1].power == doctest::Approx(3.11e5));
  CHECK(log[1].theta == doctest::Approx(cfg.theta_max));
  CHECK(log[2].power == doctest::Approx((1.8e5 + 3.11e5) / 2.0));
  CHECK(log[2].theta == doctest::Approx(cfg.theta_max / 2.0));
}

TEST_CASE("normalized controls round-trip through the physical box") {
  TakeoffEnv env{EnvConfig{}};
  const auto u = env.denormalize(0.25, 0.75);
  CHECK(u.power_W == doctest::Approx(1.8e5 + 0.25 * 1.31e5));
  const auto n = env.normalize(u);
  CHECK(n[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(n[1] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("commanded energy integrates commanded power over the step interval") {
  TakeoffEnv env{EnvConfig{}};
  env.reset();
  env.step_control(ControlInput{2.0e5, 0.0});
  env.step_control(ControlInput{2.5e5, 0.0});
  env.step_control(ControlInput{5.0e5, 0.0});  // clamps to 3.11e5
  CHECK(env.energy_J() == doctest::Approx((2.0e5 + 2.5e5 + 3.11e5) * 0.1).epsilon(1e-14));
  CHECK(env.energy_Wh() == doctest::Approx(21.13888888888889).epsilon(1e-13));
}

TEST_CASE("reversed chordwise inflow ends the episode with the full penalty") {
  EnvConfig cfg;
  cfg.p_min = 0.0;  // allow an unpowered drop
  TakeoffEnv env{cfg};
  env.reset();
  // theta = 0 makes the chordwise inflow equal vy, which one unpowered step
  // drives negative while altitude is still positive.
  auto res = env.step_control(ControlInput{0.0, 0.0});
  CHECK(res.done);
  CHECK(res.cause == TerminationCause::kNegFreestream);
  CHECK(res.state.y > 0.0);
  CHECK(res.reward.penalty == doctest::Approx(-20.0).epsilon(1e-14));  // violated at t_pre = 0
}

TEST_CASE("ground contact takes precedence over reversed inflow") {
  EnvConfig cfg;
  cfg.p_min = 0.0;
  cfg.init_y = 0.05;
  cfg.init_vy = -3.0;  // first step puts y below ground AND inflow negative
  TakeoffEnv env{cfg};
  env.reset();
  auto res = env.step_control(ControlInput{0.0, 0.0});
  CHECK(res.done);
  CHECK(res.cause == TerminationCause::kGround);
  CHECK(res.state.y < 0.0);
  CHECK(res.reward.penalty == doctest::Approx(-20.0).epsilon(1e-14));
}

TEST_CASE("reaching both targets ends the episode without penalty") {
  EnvConfig cfg;
  cfg.init_y = 310.0;
  cfg.init_vx = 80.0;  // comfortable margin over both targets
  TakeoffEnv env{cfg};
  env.reset();
  // wing aligned with the oncoming flow so one step keeps the margins
  auto res = env.step_control(ControlInput{3.11e5, cfg.theta_max});
  CHECK(res.done);
  CHECK(res.cause == TerminationCause::kTookOff);
  CHECK(res.reward.penalty == 0.0);
}

TEST_CASE("success is checked before timeout on the final step") {
  EnvConfig cfg;
  cfg.t_max = 0.1;  // single-step episode
  cfg.init_y = 310.0;
  cfg.init_vx = 80.0;
  TakeoffEnv env{cfg};
  env.reset();
  auto res = env.step_control(ControlInput{3.11e5, cfg.theta_max});
  CHECK(res.done);
  CHECK(res.cause == TerminationCause::kTookOff);
}

TEST_CASE("episodes time out after t_max of simulated time") {
  EnvConfig cfg;
  cfg.t_max = 0.3;
  TakeoffEnv env{cfg};
  env.reset();
  auto r1 = env.step_control(ControlInput{2.2e5, 0.0});
  CHECK_FALSE(r1.done);
  auto r2 = env.step_control(ControlInput{2.2e5, 0.0});
  CHECK_FALSE(r2.done);
  auto r3 = env.step_control(ControlInput{2.2e5, 0.0});
  CHECK(r3.done);
  CHECK(r3.cause == TerminationCause::kTimeout);
  CHECK(r3.reward.penalty == 0.0);
  CHECK(env.steps() == 3);
}

TEST_CASE("stepping a finished episode is a logic error") {
  EnvConfig cfg;
  cfg.t_max = 0.1;
  TakeoffEnv env{cfg};
  env.reset();
  env.step_control(ControlInput{2.2e5, 0.0});
  CHECK(env.done());
  CHECK_THROWS_AS(env.step_control(ControlInput{2.2e5, 0.0}), std::logic_error);
  env.reset();  // reset clears the flag
  CHECK_FALSE(env.done());
}

TEST_CASE("episode log records times, controls, rewards, and energy") {
  EnvConfig cfg;
  TakeoffEnv env{cfg};
  env.enable_logging(true);
  env.reset();
  env.step_control(ControlInput{2.0e5, 0.1});
  env.step_control(ControlInput{2.5e5, 0.2});
  const auto& log = env.log();
  REQUIRE(log.size() == 2);
  CHECK(log[0].t == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(log[1].t == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(log[1].power == 2.5e5);
  CHECK(log[1].theta == 0.2);
  CHECK(log[1].energy_Wh == doctest::Approx(env.energy_Wh()).epsilon(1e-14));
  const auto r = reward_components(log[1].y, log[1].vx, 2.5e5, cfg);
  CHECK(log[1].reward == doctest::Approx(r.total()).epsilon(1e-14));
  env.reset();
  CHECK(env.log().empty());
}

TEST_CASE("rewards are computed on the post-step state") {
  EnvConfig cfg;
  TakeoffEnv env{cfg};
  env.reset();
  auto res = env.step_control(ControlInput{2.2e5, 0.0});
  const auto expect = reward_components(res.state.y, res.state.vx, 2.2e5, cfg);
  CHECK(res.reward.r_y == doctest::Approx(expect.r_y).epsilon(1e-14));
  CHECK(res.reward.r_vx == doctest::Approx(expect.r_vx).epsilon(1e-14));
  CHECK(res.reward.r_p == doctest::Approx(expect.r_p).epsilon(1e-14));
}
