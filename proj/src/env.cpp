#include "evtol/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evtol {

const char* to_string(TerminationCause c) {
  switch (c) {
    case TerminationCause::kNone: return "none";
    case TerminationCause::kGround: return "ground";
    case TerminationCause::kNegFreestream: return "neg_freestream";
    case TerminationCause::kTookOff: return "took_off";
    case TerminationCause::kTimeout: return "timeout";
  }
  return "?";
}

RewardTerms reward_components(double y, double vx, double power, const EnvConfig& cfg) {
  const double k = cfg.k, cc = cfg.cc, rw = cfg.rho_w;
  const double ecc = std::exp(cc);
  const double denom = 3.0 * (ecc - 1.0) * (rw + 1.0);
  RewardTerms r;
  r.r_y = k * ecc * (std::exp(-cc * std::abs(1.0 - y / cfg.target_y)) - 1.0) / denom;
  r.r_vx = k * ecc * (std::exp(-cc * std::abs(1.0 - vx / cfg.target_vx)) - 1.0) / denom;
  r.r_p = -rw * k * power / (cfg.p_norm * (rw + 1.0));
  return r;
}

double terminal_penalty(double t_violation, const EnvConfig& cfg) {
  return -10.0 * cfg.k * (cfg.t_max - t_violation);
}

TakeoffEnv::TakeoffEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {}

Observation TakeoffEnv::reset() {
  state_ = VehicleState{};
  state_.y = cfg_.init_y;
  state_.vx = cfg_.init_vx;
  state_.vy = cfg_.init_vy;
  energy_J_ = 0.0;
  steps_ = 0;
  done_ = false;
  cause_ = TerminationCause::kNone;
  have_proposal_ = false;
  proposal_ = {cfg_.obs_padding, cfg_.obs_padding, cfg_.obs_padding, cfg_.obs_padding};
  log_.clear();
  return observe();
}

Observation TakeoffEnv::observe() const {
  Observation o;
  if (cfg_.obs_mode == ObsMode::kVanilla) {
    o = {state_.y, state_.vx, state_.vy};
  } else {
    o = {state_.y, state_.vx, state_.vy, proposal_[0], proposal_[1], proposal_[2], proposal_[3]};
  }
  return o;
}

void TakeoffEnv::set_proposal(double mu_p, double mu_th, double var_p, double var_th) {
  proposal_ = {mu_p, mu_th, var_p, var_th};
  have_proposal_ = true;
}

ControlInput TakeoffEnv::denormalize(double p01, double th01) const {
  p01 = std::clamp(p01, 0.0, 1.0);
  th01 = std::clamp(th01, 0.0, 1.0);
  ControlInput u;
  u.power_W = cfg_.p_min + p01 * (cfg_.p_max - cfg_.p_min);
  u.theta_rad = cfg_.theta_min + th01 * (cfg_.theta_max - cfg_.theta_min);
  return u;
}

std::array<double, 2> TakeoffEnv::normalize(const ControlInput& u) const {
  return {(u.power_W - cfg_.p_min) / (cfg_.p_max - cfg_.p_min),
          (u.theta_rad - cfg_.theta_min) / (cfg_.theta_max - cfg_.theta_min)};
}

StepResult TakeoffEnv::step_action(double a_power, double a_theta) {
  a_power = std::clamp(a_power, -1.0, 1.0);
  a_theta = std::clamp(a_theta, -1.0, 1.0);
  return step_control(denormalize((a_power + 1.0) / 2.0, (a_theta + 1.0) / 2.0));
}

StepResult TakeoffEnv::step_control(ControlInput u) {
  if (done_) throw std::logic_error("TakeoffEnv::step: episode is done; call reset()");
  u.power_W = std::clamp(u.power_W, cfg_.p_min, cfg_.p_max);
  u.theta_rad = std::clamp(u.theta_rad, cfg_.theta_min, cfg_.theta_max);

  const double t_pre = state_.t;
  StepResult out;
  state_ = step_dynamics(state_, u, cfg_.dt, cfg_.vehicle, &out.forces);
  energy_J_ += u.power_W * cfg_.dt;
  steps_ += 1;

  out.reward = reward_components(state_.y, state_.vx, u.power_W, cfg_);

  // chordwise inflow after the step, under the tilt just applied
  const double u_chord =
      state_.vx * std::sin(u.theta_rad) + state_.vy * std::cos(u.theta_rad);

  // termination order: safety, then success, then timeout
  if (state_.y < 0.0 || u_chord < 0.0) {
    done_ = true;
    cause_ = state_.y < 0.0 ? TerminationCause::kGround : TerminationCause::kNegFreestream;
    out.reward.penalty = terminal_penalty(t_pre, cfg_);
  } else if (state_.y >= cfg_.target_y && state_.vx >= cfg_.target_vx) {
    done_ = true;
    cause_ = TerminationCause::kTookOff;
  } else if (steps_ >= cfg_.max_steps()) {
    done_ = true;
    cause_ = TerminationCause::kTimeout;
  }

  out.done = done_;
  out.cause = cause_;
  out.state = state_;
  out.obs = observe();

  if (logging_) {
    EpisodeRow row{state_.t, state_.x,         state_.y,         state_.vx,
                   state_.vy, u.power_W,        u.theta_rad,      out.reward.total(),
                   out.reward.r_y, out.reward.r_vx, out.reward.r_p, energy_Wh()};
    row.proposal = proposal_;
    log_.push_back(row);
  }
  return out;
}

}  // namespace evtol
