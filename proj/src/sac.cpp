#include "evtol/sac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "evtol/kernels.hpp"

namespace evtol {

namespace {
constexpr double kLn2Pi = 1.8378770664093453;  // ln(2*pi)
constexpr double kLn2 = 0.6931471805599453;    // ln(2)

double stable_softplus(double x) {
  // log(1 + e^x) without overflow on either tail
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}
}  // namespace

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  store_.reserve(std::min<std::size_t>(capacity, 1 << 20));
}

void ReplayBuffer::push(Transition t) {
  if (store_.size() < capacity_) {
    store_.push_back(std::move(t));
  } else {
    store_[cursor_] = std::move(t);  // overwrite the oldest slot
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

// ------------------------------------------------------------------- mlp

Mlp::Mlp(const std::string& prefix, int in_dim, const std::vector<int>& hidden, int out_dim,
         Rng& rng, bool zero_final)
    : in_dim_(in_dim), out_dim_(out_dim) {
  if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("Mlp: bad dimensions");
  int prev = in_dim;
  int li = 0;
  auto add_layer = [&](int next, bool zero) {
    const std::string base = prefix + "l" + std::to_string(li++) + ".";
    Tensor w = zero ? Tensor(prev, next)
                    : Tensor::randn(prev, next, rng, 1.0 / std::sqrt(static_cast<double>(prev)));
    params_.add(base + "w", std::move(w));
    params_.add(base + "b", Tensor(1, next));
    prev = next;
  };
  for (int h : hidden) add_layer(h, false);
  add_layer(out_dim, zero_final);
}

Var Mlp::forward(Tape& tape, const std::vector<Var>& leaves, Var x) const {
  const int n_layers = layers();
  for (int l = 0; l < n_layers; ++l) {
    x = tape.add_bias(tape.matmul(x, leaves[2 * l]), leaves[2 * l + 1]);
    if (l + 1 < n_layers) x = tape.relu(x);
  }
  return x;
}

Tensor Mlp::forward_plain(const Tensor& x) const {
  if (x.cols() != in_dim_) throw std::invalid_argument("Mlp::forward_plain: input width mismatch");
  const auto& ops = kern::active();
  Tensor cur = x;
  const int n_layers = layers();
  for (int l = 0; l < n_layers; ++l) {
    const Tensor& w = params_[2 * l].value;
    const Tensor& b = params_[2 * l + 1].value;
    Tensor next(cur.rows(), w.cols());
    ops.gemm_nn(cur.data(), w.data(), next.data(), cur.rows(), cur.cols(), w.cols(), false);
    const bool last = l + 1 == n_layers;
    for (int r = 0; r < next.rows(); ++r) {
      double* row = next.data() + static_cast<std::size_t>(r) * next.cols();
      for (int j = 0; j < next.cols(); ++j) {
        row[j] += b[j];
        if (!last && row[j] < 0.0) row[j] = 0.0;
      }
    }
    cur = next;
  }
  return cur;
}

// ----------------------------------------------------------------- agent

SacAgent::SacAgent(int obs_dim, int act_dim, SacConfig cfg, std::uint64_t seed)
    : obs_dim_(obs_dim), act_dim_(act_dim), cfg_(std::move(cfg)) {
  if (obs_dim < 1 || act_dim < 1) throw std::invalid_argument("SacAgent: bad dimensions");
  if (!(cfg_.tau > 0.0 && cfg_.tau <= 1.0)) throw std::invalid_argument("SacAgent: tau not in (0,1]");
  if (!(cfg_.gamma > 0.0 && cfg_.gamma < 1.0))
    throw std::invalid_argument("SacAgent: gamma not in (0,1)");
  if (cfg_.buffer_capacity < static_cast<std::size_t>(cfg_.batch))
    throw std::invalid_argument("SacAgent: buffer capacity below batch size");
  if (!cfg_.obs_scale.empty() && static_cast<int>(cfg_.obs_scale.size()) != obs_dim)
    throw std::invalid_argument("SacAgent: obs_scale length must match obs_dim");

  Rng rng(seed);
  actor_ = Mlp("actor.", obs_dim, cfg_.actor_hidden, 2 * act_dim, rng, /*zero_final=*/true);
  critic1_ = Mlp("critic1.", obs_dim + act_dim, cfg_.critic_hidden, 1, rng, false);
  critic2_ = Mlp("critic2.", obs_dim + act_dim, cfg_.critic_hidden, 1, rng, false);
  target1_ = Mlp("target1.", obs_dim + act_dim, cfg_.critic_hidden, 1, rng, false);
  target2_ = Mlp("target2.", obs_dim + act_dim, cfg_.critic_hidden, 1, rng, false);
  target1_.params().restore(critic1_.params().snapshot());
  target2_.params().restore(critic2_.params().snapshot());
}

Tensor SacAgent::scale_rows(const std::vector<const std::vector<double>*>& rows) const {
  Tensor out(static_cast<int>(rows.size()), obs_dim_);
  for (int r = 0; r < out.rows(); ++r) {
    const std::vector<double>& src = *rows[r];
    if (static_cast<int>(src.size()) != obs_dim_)
      throw std::invalid_argument("SacAgent: observation width mismatch");
    for (int j = 0; j < obs_dim_; ++j)
      out.at(r, j) = cfg_.obs_scale.empty() ? src[j] : src[j] * cfg_.obs_scale[j];
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> SacAgent::policy_params(
    const std::vector<double>& obs) const {
  const Tensor x = scale_rows({&obs});
  const Tensor h = actor_.forward_plain(x);
  std::vector<double> mu(act_dim_), log_std(act_dim_);
  for (int d = 0; d < act_dim_; ++d) {
    mu[d] = h.at(0, d);
    log_std[d] = std::clamp(h.at(0, act_dim_ + d), cfg_.log_std_min, cfg_.log_std_max);
  }
  return {mu, log_std};
}

std::vector<double> SacAgent::select_action(const std::vector<double>& obs, bool deterministic,
                                            Rng& rng) const {
  const auto [mu, log_std] = policy_params(obs);
  std::vector<double> a(act_dim_);
  for (int d = 0; d < act_dim_; ++d) {
    const double xi = deterministic ? mu[d] : mu[d] + std::exp(log_std[d]) * rng.normal();
    a[d] = std::tanh(xi);
  }
  return a;
}

double SacAgent::squashed_log_prob(double mu, double log_std, double xi) {
  const double z = (xi - mu) * std::exp(-log_std);
  const double log_normal = -0.5 * kLn2Pi - log_std - 0.5 * z * z;
  // log(1 - tanh(xi)^2) = 2*(ln 2 - xi - softplus(-2 xi)), stable in both tails
  const double log_jac = 2.0 * (kLn2 - xi - stable_softplus(-2.0 * xi));
  return log_normal - log_jac;
}

namespace {
// Bind a store's tensors as constant leaves (no gradient flow).
std::vector<Var> bind_frozen(Tape& tape, const ParamStore& store) {
  std::vector<Var> leaves(store.size());
  for (int i = 0; i < store.size(); ++i) leaves[i] = tape.leaf(store[i].value, false);
  return leaves;
}
}  // namespace

SacLosses SacAgent::update(const ReplayBuffer& buffer, double lr, Rng& rng) {
  const int B = cfg_.batch;
  if (buffer.size() < static_cast<std::size_t>(B))
    throw std::logic_error("SacAgent::update: buffer smaller than batch");

  std::vector<std::size_t> idx(B);
  for (int b = 0; b < B; ++b) idx[b] = rng.uniform_index(buffer.size());

  std::vector<const std::vector<double>*> obs_rows(B), next_rows(B);
  Tensor act(B, act_dim_), rew(B, 1), notdone(B, 1);
  for (int b = 0; b < B; ++b) {
    const Transition& t = buffer[idx[b]];
    obs_rows[b] = &t.obs;
    next_rows[b] = &t.next_obs;
    for (int d = 0; d < act_dim_; ++d) act.at(b, d) = t.action[d];
    rew[b] = t.reward;
    notdone[b] = t.done ? 0.0 : 1.0;
  }
  const Tensor obs_s = scale_rows(obs_rows);
  const Tensor next_s = scale_rows(next_rows);

  // Critic regression target: fresh squashed sample from the current actor
  // at s', scored by the slower-moving target critics, minus the entropy
  // term.  No tape needed; nothing here is differentiated.
  Tensor y(B, 1);
  {
    const Tensor h = actor_.forward_plain(next_s);
    Tensor xq(B, obs_dim_ + act_dim_);
    std::vector<double> logp(B, 0.0);
    for (int b = 0; b < B; ++b) {
      for (int j = 0; j < obs_dim_; ++j) xq.at(b, j) = next_s.at(b, j);
      for (int d = 0; d < act_dim_; ++d) {
        const double mu = h.at(b, d);
        const double ls = std::clamp(h.at(b, act_dim_ + d), cfg_.log_std_min, cfg_.log_std_max);
        const double xi = mu + std::exp(ls) * rng.normal();
        logp[b] += squashed_log_prob(mu, ls, xi);
        xq.at(b, obs_dim_ + d) = std::tanh(xi);
      }
    }
    const Tensor q1 = target1_.forward_plain(xq);
    const Tensor q2 = target2_.forward_plain(xq);
    for (int b = 0; b < B; ++b) {
      const double qmin = std::min(q1[b], q2[b]);
      y[b] = rew[b] + cfg_.gamma * notdone[b] * (qmin - cfg_.alpha_ent * logp[b]);
    }
  }

  SacLosses losses;

  // --- twin critic step: each regresses its Q(s,a) to y ---
  {
    Tape tape;
    const std::vector<Var> l1 = critic1_.params().bind(tape);
    const std::vector<Var> l2 = critic2_.params().bind(tape);
    Tensor xq(B, obs_dim_ + act_dim_);
    for (int b = 0; b < B; ++b) {
      for (int j = 0; j < obs_dim_; ++j) xq.at(b, j) = obs_s.at(b, j);
      for (int d = 0; d < act_dim_; ++d) xq.at(b, obs_dim_ + d) = act.at(b, d);
    }
    const Var x = tape.leaf(xq);
    const Var target = tape.leaf(y);
    const Var d1 = tape.sub(critic1_.forward(tape, l1, x), target);
    const Var d2 = tape.sub(critic2_.forward(tape, l2, x), target);
    const Var loss1 = tape.mean_all(tape.mul(d1, d1));
    const Var loss2 = tape.mean_all(tape.mul(d2, d2));
    losses.critic1 = tape.value(loss1)[0];
    losses.critic2 = tape.value(loss2)[0];
    tape.backward(tape.add(loss1, loss2));
    critic1_.params().adam_update(tape, l1, lr);
    critic2_.params().adam_update(tape, l2, lr);
  }

  // --- actor step: minimize alpha*log pi - min Q over reparameterized
  // samples; critics enter as constants so only the policy moves ---
  {
    Tape tape;
    const std::vector<Var> la = actor_.params().bind(tape);
    const std::vector<Var> f1 = bind_frozen(tape, critic1_.params());
    const std::vector<Var> f2 = bind_frozen(tape, critic2_.params());

    Tensor eps(B, act_dim_);
    Tensor logn_const(B, act_dim_);  // eps-dependent Gaussian log-density part
    for (std::size_t i = 0; i < eps.size(); ++i) {
      eps[i] = rng.normal();
      logn_const[i] = -0.5 * kLn2Pi - 0.5 * eps[i] * eps[i];
    }

    const Var x = tape.leaf(obs_s);
    const Var h = actor_.forward(tape, la, x);
    const Var mu = tape.slice_cols(h, 0, act_dim_);
    const Var log_std =
        tape.clamp(tape.slice_cols(h, act_dim_, 2 * act_dim_), cfg_.log_std_min, cfg_.log_std_max);
    const Var xi = tape.add(mu, tape.mul(tape.exp_(log_std), tape.leaf(eps)));
    const Var a = tape.tanh_(xi);

    // log N(xi | mu, sigma) = -log_std - ln(2 pi)/2 - eps^2/2 under the
    // reparameterization xi = mu + sigma*eps
    const Var log_normal = tape.add(tape.scale(log_std, -1.0), tape.leaf(logn_const));
    // log(1 - tanh(xi)^2) = 2 (ln 2 - xi - softplus(-2 xi))
    const Var log_jac = tape.scale(
        tape.add_const(tape.sub(tape.scale(xi, -1.0), tape.softplus(tape.scale(xi, -2.0))), kLn2),
        2.0);
    const Var logp = tape.sum_cols(tape.sub(log_normal, log_jac));  // (B x 1)

    const Var xq = tape.concat_cols({x, a});
    const Var qmin =
        tape.emin(critic1_.forward(tape, f1, xq), critic2_.forward(tape, f2, xq));
    const Var loss = tape.mean_all(tape.sub(tape.scale(logp, cfg_.alpha_ent), qmin));
    losses.actor = tape.value(loss)[0];
    tape.backward(loss);
    actor_.params().adam_update(tape, la, lr);
  }

  if (!std::isfinite(losses.actor) || !std::isfinite(losses.critic1) ||
      !std::isfinite(losses.critic2))
    throw std::runtime_error("SacAgent::update: non-finite loss (actor=" +
                             std::to_string(losses.actor) +
                             ", critic1=" + std::to_string(losses.critic1) +
                             ", critic2=" + std::to_string(losses.critic2) + ")");

  soft_update_targets(cfg_.tau);
  return losses;
}

void SacAgent::soft_update_targets(double tau) {
  auto blend = [tau](ParamStore& online, ParamStore& target) {
    for (int i = 0; i < online.size(); ++i) {
      Tensor& t = target[i].value;
      const Tensor& o = online[i].value;
      for (std::size_t k = 0; k < t.size(); ++k) t[k] = (1.0 - tau) * t[k] + tau * o[k];
    }
  };
  blend(critic1_.params(), target1_.params());
  blend(critic2_.params(), target2_.params());
}

// ---------------------------------------------------------------- training

namespace {
double run_eval_episode(SacAgent& agent, RlEnv& env, std::uint64_t seed) {
  std::vector<double> obs = env.reset(seed);
  Rng unused(0);  // deterministic actions consume no randomness
  double ret = 0.0;
  while (true) {
    const auto step = env.step(agent.select_action(obs, true, unused));
    ret += step.reward;
    if (step.done) return ret;
    obs = step.obs;
  }
}

double evaluate(SacAgent& agent, RlEnv& env, std::uint64_t seed_base, int episodes) {
  double sum = 0.0;
  for (int e = 0; e < episodes; ++e) sum += run_eval_episode(agent, env, seed_base + 1000003ull * e);
  return sum / episodes;
}
}  // namespace

SacTrainResult train_sac(SacAgent& agent, RlEnv& env, RlEnv& eval_env, std::uint64_t seed,
                         const std::function<bool(long env_steps)>& episode_end) {
  const SacConfig& cfg = agent.config();
  ReplayBuffer buffer(cfg.buffer_capacity);
  Rng rng(seed);
  SacTrainResult result;
  result.best_return = -std::numeric_limits<double>::infinity();

  const std::uint64_t eval_seed_base = seed ^ 0x5eed5acull;
  SacLosses last_losses;
  auto run_eval = [&](long step_now, double lr_now) {
    const double ret = evaluate(agent, eval_env, eval_seed_base, cfg.eval_episodes);
    result.history.push_back({step_now, ret, lr_now, last_losses});
    if (ret > result.best_return) {
      result.best_return = ret;
      result.best_step = step_now;
      result.best_actor = agent.actor().params().snapshot();
    }
  };

  // linear anneal: full rate at step 0, exactly half at total_steps/2, zero at the end
  auto lr_at = [&cfg](long s) {
    return cfg.lr_start * std::max(0.0, 1.0 - static_cast<double>(s) / cfg.total_steps);
  };

  std::vector<double> obs = env.reset(seed + 0xE115EEDull);
  run_eval(0, lr_at(0));  // untrained baseline; also seeds the argmax

  for (long step = 0; step < cfg.total_steps; ++step) {
    std::vector<double> action(agent.act_dim());
    if (step < cfg.warmup_steps) {
      for (double& a : action) a = rng.uniform(-1.0, 1.0);
    } else {
      action = agent.select_action(obs, false, rng);
    }

    const auto sr = env.step(action);
    buffer.push({obs, action, sr.obs, sr.reward, sr.done});
    result.env_steps = step + 1;

    if (step + 1 >= cfg.warmup_steps && buffer.size() >= static_cast<std::size_t>(cfg.batch))
      last_losses = agent.update(buffer, lr_at(step), rng);

    bool stop = false;
    if (sr.done) {
      result.episodes += 1;
      if (episode_end && episode_end(result.env_steps)) stop = true;
      obs = env.reset(seed + 0xE115EEDull + 7919ull * static_cast<std::uint64_t>(result.episodes));
    } else {
      obs = sr.obs;
    }

    if ((step + 1) % cfg.eval_interval == 0) run_eval(step + 1, lr_at(step + 1));
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }

  if (!result.best_actor.empty()) agent.actor().params().restore(result.best_actor);
  return result;
}

}  // namespace evtol
