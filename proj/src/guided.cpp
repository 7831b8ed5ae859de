#include "evtol/guided.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evtol {

namespace {
EnvConfig with_mode(EnvConfig cfg, ObsMode mode) {
  cfg.obs_mode = mode;
  return cfg;
}
}  // namespace

// --------------------------------------------------------------- vanilla

VanillaTakeoffEnv::VanillaTakeoffEnv(EnvConfig cfg)
    : env_(with_mode(std::move(cfg), ObsMode::kVanilla)) {}

std::vector<double> VanillaTakeoffEnv::reset(std::uint64_t) {
  return env_.reset();  // the physics reset is deterministic
}

RlEnv::Step VanillaTakeoffEnv::step(const std::vector<double>& action) {
  const StepResult r = env_.step_action(std::clamp(action.at(0), -1.0, 1.0),
                                        std::clamp(action.at(1), -1.0, 1.0));
  return {r.obs, r.reward.total(), r.done};
}

// ---------------------------------------------------------------- guided

GuidedTakeoffEnv::GuidedTakeoffEnv(EnvConfig cfg, const TrajTransformer& model)
    : model_(model), env_(with_mode(std::move(cfg), ObsMode::kGuided)) {
  if (env_.config().max_steps() > model_.config().n_max)
    throw std::invalid_argument(
        "GuidedTakeoffEnv: episode horizon exceeds the model's sequence capacity");
}

std::vector<double> GuidedTakeoffEnv::reset(std::uint64_t) {
  history_.clear();
  z_log_.clear();
  cache_ = model_.make_cache();
  have_proposal_ = false;
  proposal_ = {};
  return env_.reset();
}

RlEnv::Step GuidedTakeoffEnv::step(const std::vector<double>& z_in) {
  std::array<double, 2> z{std::clamp(z_in.at(0), -1.0, 1.0), std::clamp(z_in.at(1), -1.0, 1.0)};
  std::array<double, 2> a01{};
  for (int d = 0; d < 2; ++d) {
    if (!have_proposal_) {
      a01[d] = 0.5 * (z[d] + 1.0);  // no proposal yet: affine onto [0,1]
    } else {
      const double sigma = std::sqrt(proposal_[2 + d]);
      a01[d] = std::clamp(proposal_[d] + z[d] * sigma, 0.0, 1.0);
      // envelope with both ends clamped to the normalized range (it
      // degenerates to a point when the proposal lies wholly outside [0,1])
      const double lo = std::clamp(proposal_[d] - sigma, 0.0, 1.0);
      const double hi = std::clamp(proposal_[d] + sigma, 0.0, 1.0);
      if (a01[d] < lo - 1e-15 || a01[d] > hi + 1e-15) violations_ += 1;
    }
  }

  const StepResult r = env_.step_control(env_.denormalize(a01[0], a01[1]));
  history_.push_back(a01);
  z_log_.push_back(z);

  if (r.done) return {r.obs, r.reward.total(), true};

  proposal_ = model_.extend(cache_, a01);
  have_proposal_ = true;
  env_.set_proposal(proposal_[0], proposal_[1], proposal_[2], proposal_[3]);
  return {env_.observe(), r.reward.total(), false};
}

// -------------------------------------------------------------- training

std::vector<double> takeoff_obs_scale(ObsMode mode) {
  std::vector<double> s{1.0 / 305.0, 1.0 / 67.0, 1.0 / 30.0};
  if (mode == ObsMode::kGuided) s.insert(s.end(), {1.0, 1.0, 1.0, 1.0});
  return s;
}

namespace {
template <typename Adapter>
TakeoffTrainResult run_training(SacAgent& agent, Adapter& env, Adapter& eval_env,
                                std::uint64_t seed, bool stop_on_first_takeoff) {
  if (agent.obs_dim() != env.obs_dim() || agent.act_dim() != env.act_dim())
    throw std::invalid_argument("takeoff training: agent dimensions do not match the mode");
  TakeoffTrainResult result;
  auto on_episode_end = [&](long env_steps) {
    if (env.last_cause() == TerminationCause::kTookOff) {
      result.takeoffs += 1;
      if (result.first_takeoff_step < 0) result.first_takeoff_step = env_steps;
      return stop_on_first_takeoff;
    }
    return false;
  };
  result.sac = train_sac(agent, env, eval_env, seed, on_episode_end);
  return result;
}
}  // namespace

TakeoffTrainResult train_takeoff_vanilla(SacAgent& agent, const EnvConfig& env_cfg,
                                         std::uint64_t seed, bool stop_on_first_takeoff) {
  VanillaTakeoffEnv env(env_cfg), eval_env(env_cfg);
  return run_training(agent, env, eval_env, seed, stop_on_first_takeoff);
}

TakeoffTrainResult train_takeoff_guided(SacAgent& agent, const EnvConfig& env_cfg,
                                        const TrajTransformer& model, std::uint64_t seed,
                                        bool stop_on_first_takeoff) {
  GuidedTakeoffEnv env(env_cfg, model), eval_env(env_cfg, model);
  TakeoffTrainResult result = run_training(agent, env, eval_env, seed, stop_on_first_takeoff);
  result.envelope_violations = env.envelope_violations() + eval_env.envelope_violations();
  return result;
}

}  // namespace evtol
