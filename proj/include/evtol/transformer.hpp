#pragma once
// Encoder-only transformer over control sequences.
//
// Each position holds one executed normalized control (power, tilt) in
// [0,1]^2.  The model embeds it, adds sinusoidal position encoding, applies
// causally masked multi-head self-attention blocks (post-norm residuals,
// full-width heads), and emits, per position, the parameters of a diagonal
// Gaussian over the NEXT control: (mu_P, mu_theta, logvar_P, logvar_theta).
// Training minimizes the Gaussian negative log-likelihood of the successor
// controls; generation and proposal run through an incremental per-position
// cache so guided rollouts stay cheap.

#include <array>
#include <cstdint>
#include <vector>

#include "evtol/params.hpp"
#include "evtol/rng.hpp"
#include "evtol/tape.hpp"

namespace evtol {

struct TransformerConfig {
  int in_dim = 2;
  int out_dim = 4;
  int d_model = 64;
  int heads = 4;
  int d_head = 64;        // per-head width (full width, not d_model/heads)
  int blocks = 2;
  bool use_ffn = false;   // optional position-wise feed-forward sublayer
  int d_ffn = 256;
  double dropout = 0.1;
  double logvar_min = -10.0;
  double logvar_max = 4.0;
  int n_max = 400;        // longest supported sequence
  double pe_base = 10000.0;
};

struct TransformerTrainConfig {
  int epochs = 100;
  int batch = 64;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  bool verbose = false;
};

struct TrainHistory {
  std::vector<double> train_nll;  // per epoch, averaged per predicted position
  std::vector<double> val_nll;
  int best_epoch = -1;            // epoch whose weights were kept
  double best_val = 0.0;
  bool aborted = false;  // loss diverged; best-so-far weights were restored
};

using ActionSeq = std::vector<std::array<double, 2>>;

class TrajTransformer {
 public:
  TrajTransformer(TransformerConfig cfg, std::uint64_t init_seed);

  const TransformerConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  long param_count() const { return params_.scalar_count(); }
  Tensor position_encoding() const { return pe_; }  // (n_max x d_model)

  // Tape forward over a whole sequence; returns the (L x out_dim) output id.
  // Parameters must be bound once per tape via params().bind(tape).
  Var forward(Tape& tape, const std::vector<Var>& leaves, const ActionSeq& actions,
              bool train, Rng* dropout_rng) const;

  // Gaussian NLL of actions[1..L-1] under the model's predictions from the
  // prefix, as a scalar node: sum over positions and dims of
  // logvar + (y-mu)^2/exp(logvar) + ln(2*pi), scaled by 1/(2*n_positions).
  Var sequence_nll(Tape& tape, Var outputs, const ActionSeq& actions) const;

  // Train on sequences, tracking validation NLL; keeps the best-validation
  // weights.  NLL values are averaged per predicted position.
  TrainHistory train(const std::vector<ActionSeq>& train_seqs,
                     const std::vector<ActionSeq>& val_seqs,
                     const TransformerTrainConfig& tc);

  double eval_nll(const std::vector<ActionSeq>& seqs) const;

  // --- incremental evaluation (no tape, no dropout) ---
  struct EvalCache {
    int len = 0;
    std::vector<Tensor> k;  // [block*heads] (n_max x d_head), filled rows < len
    std::vector<Tensor> v;
  };

  EvalCache make_cache() const;
  // Feed one executed action; returns {mu_P, mu_theta, var_P, var_theta}
  // for the NEXT action (variance already exponentiated and clamped).
  std::array<double, 4> extend(EvalCache& cache, const std::array<double, 2>& action) const;

  // Convenience: run the whole history through a fresh cache.
  std::array<double, 4> propose_next(const ActionSeq& history) const;

  // Autoregressive rollout from a first action; samples z ~ N(0,1) per dim
  // when `sample`, otherwise takes the mean; appended actions clamp to [0,1].
  ActionSeq generate(const std::array<double, 2>& first, int n_actions, bool sample,
                     Rng& rng) const;

 private:
  TransformerConfig cfg_;
  ParamStore params_;
  Tensor pe_;              // (n_max x d_model) sinusoidal table

  // Raw head outputs (mu, logvar unclamped) for the position just fed.
  std::array<double, 4> step_raw(EvalCache& cache, const std::array<double, 2>& action) const;
  std::pair<Var, int> nll_parts(Tape& tape, Var outputs, const ActionSeq& actions) const;

  int id_input_w() const;
  int id_input_b() const;
  int id_wq(int b, int h) const;
  int id_wk(int b, int h) const;
  int id_wv(int b, int h) const;
  int id_wo(int b) const;
  int id_ln1_g(int b) const;
  int id_ln1_b(int b) const;
  int id_ffn_w1(int b) const;
  int id_ffn_b1(int b) const;
  int id_ffn_w2(int b) const;
  int id_ffn_b2(int b) const;
  int id_ln2_g(int b) const;
  int id_ln2_b(int b) const;
  int id_head_w() const;
  int id_head_b() const;
};

}  // namespace evtol
