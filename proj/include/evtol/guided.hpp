#pragma once
// Couples the takeoff environment to the reinforcement learner, in two
// flavors.  The plain adapter exposes (altitude, speeds) observations and
// maps agent actions affinely onto the power/tilt bounds.  The guided
// adapter additionally runs a frozen sequence model over the executed action
// history: the agent's outputs become z-scores inside the model's proposal
// distribution (step 0, with no proposal yet, maps affinely onto the
// normalized range), and the proposal parameters ride along in the
// observation.

#include <array>
#include <cstdint>
#include <vector>

#include "evtol/env.hpp"
#include "evtol/sac.hpp"
#include "evtol/transformer.hpp"

namespace evtol {

// 3-slot observations (y, vx, vy); actions in [-1,1]^2 onto control bounds.
class VanillaTakeoffEnv : public RlEnv {
 public:
  explicit VanillaTakeoffEnv(EnvConfig cfg);

  int obs_dim() const override { return 3; }
  int act_dim() const override { return 2; }
  std::vector<double> reset(std::uint64_t seed) override;
  Step step(const std::vector<double>& action) override;

  TakeoffEnv& env() { return env_; }
  const TakeoffEnv& env() const { return env_; }
  TerminationCause last_cause() const { return env_.cause(); }

 private:
  TakeoffEnv env_;
};

// 7-slot observations (y, vx, vy, mu_P, mu_theta, var_P, var_theta); agent
// actions are z-scores within the frozen model's proposals.
class GuidedTakeoffEnv : public RlEnv {
 public:
  GuidedTakeoffEnv(EnvConfig cfg, const TrajTransformer& model);

  int obs_dim() const override { return 7; }
  int act_dim() const override { return 2; }
  std::vector<double> reset(std::uint64_t seed) override;
  Step step(const std::vector<double>& z) override;

  TakeoffEnv& env() { return env_; }
  const TakeoffEnv& env() const { return env_; }
  TerminationCause last_cause() const { return env_.cause(); }

  // Executed normalized actions and the z-scores that produced them.
  const ActionSeq& history() const { return history_; }
  const std::vector<std::array<double, 2>>& z_log() const { return z_log_; }
  // Current proposal (mu_P, mu_theta, var_P, var_theta); valid after step 1.
  const std::array<double, 4>& proposal() const { return proposal_; }
  bool has_proposal() const { return have_proposal_; }

  // Executed actions falling outside [max(0, mu-sigma), min(1, mu+sigma)]
  // (never expected; counted across episodes for the smoke-run check).
  long envelope_violations() const { return violations_; }

 private:
  const TrajTransformer& model_;
  TakeoffEnv env_;
  TrajTransformer::EvalCache cache_;
  ActionSeq history_;
  std::vector<std::array<double, 2>> z_log_;
  std::array<double, 4> proposal_{};
  bool have_proposal_ = false;
  long violations_ = 0;
};

struct TakeoffTrainResult {
  SacTrainResult sac;
  long takeoffs = 0;             // successful training episodes
  long first_takeoff_step = -1;  // env steps when the first one finished
  long envelope_violations = 0;  // guided mode, training + evaluation envs
};

// Recommended agent-side observation scaling: physical slots divided by the
// takeoff targets (305 m, 67 m/s, 30 m/s), proposal slots already ~unit.
std::vector<double> takeoff_obs_scale(ObsMode mode);

// SAC training on the takeoff task.  The agent must be built for the mode's
// dimensions (3+2 vanilla, 7+2 guided) and should carry takeoff_obs_scale.
// stop_on_first_takeoff ends training at the first successful episode.
TakeoffTrainResult train_takeoff_vanilla(SacAgent& agent, const EnvConfig& env_cfg,
                                         std::uint64_t seed, bool stop_on_first_takeoff = false);
TakeoffTrainResult train_takeoff_guided(SacAgent& agent, const EnvConfig& env_cfg,
                                        const TrajTransformer& model, std::uint64_t seed,
                                        bool stop_on_first_takeoff = false);

}  // namespace evtol
