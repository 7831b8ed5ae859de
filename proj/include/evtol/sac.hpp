#pragma once
// Soft actor-critic for continuous control: tanh-squashed Gaussian policy,
// twin critics with Polyak-averaged targets, FIFO replay ring.  Training
// takes one gradient update per environment step after a uniform-random
// warmup, anneals the learning rate linearly to zero, and evaluates the
// deterministic policy periodically, retaining the best-scoring weights.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "evtol/params.hpp"
#include "evtol/rng.hpp"
#include "evtol/tape.hpp"
#include "evtol/tensor.hpp"

namespace evtol {

// Minimal episodic-control interface the learner trains against.
// Actions live in agent space [-1,1]^act_dim; adapters own any mapping to
// physical units.
class RlEnv {
 public:
  struct Step {
    std::vector<double> obs;
    double reward = 0.0;
    bool done = false;
  };

  virtual ~RlEnv() = default;
  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual Step step(const std::vector<double>& action) = 0;
};

struct SacConfig {
  std::vector<int> actor_hidden{512, 512, 512};
  std::vector<int> critic_hidden{512, 512, 512};
  double lr_start = 4e-4;  // annealed linearly to 0 over total_steps
  int batch = 256;
  double tau = 5e-3;    // target soft-update rate
  double gamma = 0.98;  // discount
  double alpha_ent = 0.01;  // fixed entropy coefficient
  std::size_t buffer_capacity = 5000000;
  long total_steps = 5000000;
  long eval_interval = 10000;
  int eval_episodes = 5;
  long warmup_steps = 1000;  // uniform-random actions before learning
  double log_std_min = -20.0;
  double log_std_max = 2.0;
  // Element-wise observation scaling applied inside the agent before the
  // networks (raw physical observations can span 0..305).  Empty = all ones.
  std::vector<double> obs_scale;
  bool verbose = false;
};

struct Transition {
  std::vector<double> obs, action, next_obs;
  double reward = 0.0;
  bool done = false;
};

// Fixed-capacity ring; once full, each push overwrites the oldest element.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(Transition t);
  std::size_t size() const { return store_.size(); }
  std::size_t capacity() const { return capacity_; }
  // Slot access in storage order (sampling is uniform, age does not matter).
  const Transition& operator[](std::size_t i) const { return store_[i]; }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> store_;
};

// Fully connected network, relu hidden activations, linear output.
class Mlp {
 public:
  Mlp() = default;
  // zero_final zero-initializes the output layer (used by the actor so the
  // fresh deterministic policy is exactly tanh(0) = 0 with unit sigma).
  Mlp(const std::string& prefix, int in_dim, const std::vector<int>& hidden, int out_dim,
      Rng& rng, bool zero_final);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  int layers() const { return static_cast<int>(params_.size() / 2); }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Tape forward of a (B x in_dim) node; leaves from params().bind or a
  // frozen binding in the same registration order.
  Var forward(Tape& tape, const std::vector<Var>& leaves, Var x) const;
  // Plain forward for acting and target computation (no gradients).
  Tensor forward_plain(const Tensor& x) const;

 private:
  int in_dim_ = 0, out_dim_ = 0;
  ParamStore params_;  // l0.w, l0.b, l1.w, l1.b, ...
};

struct SacLosses {
  double actor = 0.0;
  double critic1 = 0.0;
  double critic2 = 0.0;
};

class SacAgent {
 public:
  SacAgent(int obs_dim, int act_dim, SacConfig cfg, std::uint64_t seed);

  const SacConfig& config() const { return cfg_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  // Action in [-1,1]^act_dim: tanh(mu) when deterministic, otherwise a
  // reparameterized sample tanh(mu + sigma*eps).
  std::vector<double> select_action(const std::vector<double>& obs, bool deterministic,
                                    Rng& rng) const;
  // Clamped (mu, log_std) the policy assigns to an observation.
  std::pair<std::vector<double>, std::vector<double>> policy_params(
      const std::vector<double>& obs) const;

  // One critic + actor gradient step on a uniformly sampled batch, followed
  // by a target soft update.  Throws logic_error if the buffer is smaller
  // than the batch and runtime_error on non-finite losses.
  SacLosses update(const ReplayBuffer& buffer, double lr, Rng& rng);

  void soft_update_targets(double tau);

  Mlp& actor() { return actor_; }
  Mlp& critic1() { return critic1_; }
  Mlp& critic2() { return critic2_; }
  Mlp& target1() { return target1_; }
  Mlp& target2() { return target2_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic1() const { return critic1_; }
  const Mlp& critic2() const { return critic2_; }
  const Mlp& target1() const { return target1_; }
  const Mlp& target2() const { return target2_; }

  // log pi of the squashed sample tanh(xi) drawn from N(mu, exp(log_std)^2),
  // one dimension: Gaussian log-density of xi minus the tanh
  // change-of-variables term log(1 - tanh(xi)^2).
  static double squashed_log_prob(double mu, double log_std, double xi);

 private:
  Tensor scale_rows(const std::vector<const std::vector<double>*>& rows) const;

  int obs_dim_, act_dim_;
  SacConfig cfg_;
  Mlp actor_, critic1_, critic2_, target1_, target2_;
};

struct SacEvalPoint {
  long step = 0;
  double mean_return = 0.0;
  double lr = 0.0;
  SacLosses losses;  // most recent losses at evaluation time
};

struct SacTrainResult {
  std::vector<SacEvalPoint> history;
  double best_return = 0.0;
  long best_step = -1;
  std::vector<Tensor> best_actor;  // actor weights at the best evaluation
  long env_steps = 0;              // cumulative, including warmup
  long episodes = 0;
  bool stopped_early = false;  // an episode callback requested a stop
};

// Off-policy training loop: act (uniform during warmup, stochastic after),
// store, update once per step, evaluate every eval_interval steps (including
// step 0) with eval_episodes deterministic episodes on eval_env, and keep
// the argmax-return actor, which is restored into the agent on return.
// episode_end, when set, runs after every finished training episode; a true
// return stops training (used for smoke runs that only need one success).
SacTrainResult train_sac(SacAgent& agent, RlEnv& env, RlEnv& eval_env, std::uint64_t seed,
                         const std::function<bool(long env_steps)>& episode_end = {});

}  // namespace evtol
