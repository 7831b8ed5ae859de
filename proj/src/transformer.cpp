#include "evtol/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evtol/kernels.hpp"

namespace evtol {

namespace {
constexpr double kLn2Pi = 1.8378770664093453;  // ln(2*pi)
}

// Parameter layout: input affine, then per block (per head Wq/Wk/Wv, then
// Wo, norm gain/bias, optional feed-forward + second norm), then the output
// head.  Index arithmetic below mirrors this registration order.
TrajTransformer::TrajTransformer(TransformerConfig cfg, std::uint64_t init_seed)
    : cfg_(cfg) {
  if (cfg_.d_model <= 0 || cfg_.heads <= 0 || cfg_.d_head <= 0 || cfg_.blocks < 0)
    throw std::invalid_argument("TrajTransformer: invalid dimensions");
  if (cfg_.n_max < 1) throw std::invalid_argument("TrajTransformer: n_max must be >= 1");

  Rng rng(init_seed);
  auto w_init = [&](int rows, int cols) {
    return Tensor::randn(rows, cols, rng, 1.0 / std::sqrt(static_cast<double>(rows)));
  };

  params_.add("input.w", w_init(cfg_.in_dim, cfg_.d_model));
  params_.add("input.b", Tensor(1, cfg_.d_model));
  for (int b = 0; b < cfg_.blocks; ++b) {
    const std::string base = "block" + std::to_string(b) + ".";
    for (int h = 0; h < cfg_.heads; ++h) {
      const std::string hb = base + "head" + std::to_string(h) + ".";
      params_.add(hb + "wq", w_init(cfg_.d_model, cfg_.d_head));
      params_.add(hb + "wk", w_init(cfg_.d_model, cfg_.d_head));
      params_.add(hb + "wv", w_init(cfg_.d_model, cfg_.d_head));
    }
    params_.add(base + "wo", w_init(cfg_.heads * cfg_.d_head, cfg_.d_model));
    params_.add(base + "norm1.gain", Tensor::full(1, cfg_.d_model, 1.0));
    params_.add(base + "norm1.bias", Tensor(1, cfg_.d_model));
    if (cfg_.use_ffn) {
      params_.add(base + "ffn.w1", w_init(cfg_.d_model, cfg_.d_ffn));
      params_.add(base + "ffn.b1", Tensor(1, cfg_.d_ffn));
      params_.add(base + "ffn.w2", w_init(cfg_.d_ffn, cfg_.d_model));
      params_.add(base + "ffn.b2", Tensor(1, cfg_.d_model));
      params_.add(base + "norm2.gain", Tensor::full(1, cfg_.d_model, 1.0));
      params_.add(base + "norm2.bias", Tensor(1, cfg_.d_model));
    }
  }
  params_.add("head.w", w_init(cfg_.d_model, cfg_.out_dim));
  params_.add("head.b", Tensor(1, cfg_.out_dim));

  // Sinusoidal position table: even columns sine, odd columns cosine, with
  // the angular rate decaying geometrically across column pairs.
  pe_ = Tensor(cfg_.n_max, cfg_.d_model);
  for (int pos = 0; pos < cfg_.n_max; ++pos) {
    for (int i = 0; i * 2 < cfg_.d_model; ++i) {
      const double rate = std::pow(cfg_.pe_base, -2.0 * i / cfg_.d_model);
      pe_.at(pos, 2 * i) = std::sin(pos * rate);
      if (2 * i + 1 < cfg_.d_model) pe_.at(pos, 2 * i + 1) = std::cos(pos * rate);
    }
  }
}

int TrajTransformer::id_input_w() const { return 0; }
int TrajTransformer::id_input_b() const { return 1; }

namespace {
inline int per_block_params(const TransformerConfig& c) {
  return c.heads * 3 + 3 + (c.use_ffn ? 6 : 0);
}
}  // namespace

int TrajTransformer::id_wq(int b, int h) const { return 2 + b * per_block_params(cfg_) + h * 3; }
int TrajTransformer::id_wk(int b, int h) const { return id_wq(b, h) + 1; }
int TrajTransformer::id_wv(int b, int h) const { return id_wq(b, h) + 2; }
int TrajTransformer::id_wo(int b) const {
  return 2 + b * per_block_params(cfg_) + cfg_.heads * 3;
}
int TrajTransformer::id_ln1_g(int b) const { return id_wo(b) + 1; }
int TrajTransformer::id_ln1_b(int b) const { return id_wo(b) + 2; }
int TrajTransformer::id_ffn_w1(int b) const { return id_wo(b) + 3; }
int TrajTransformer::id_ffn_b1(int b) const { return id_wo(b) + 4; }
int TrajTransformer::id_ffn_w2(int b) const { return id_wo(b) + 5; }
int TrajTransformer::id_ffn_b2(int b) const { return id_wo(b) + 6; }
int TrajTransformer::id_ln2_g(int b) const { return id_wo(b) + 7; }
int TrajTransformer::id_ln2_b(int b) const { return id_wo(b) + 8; }
int TrajTransformer::id_head_w() const { return 2 + cfg_.blocks * per_block_params(cfg_); }
int TrajTransformer::id_head_b() const { return id_head_w() + 1; }

Var TrajTransformer::forward(Tape& tape, const std::vector<Var>& leaves,
                             const ActionSeq& actions, bool train, Rng* dropout_rng) const {
  const int L = static_cast<int>(actions.size());
  if (L < 1) throw std::invalid_argument("TrajTransformer::forward: empty sequence");
  if (L > cfg_.n_max)
    throw std::invalid_argument("TrajTransformer::forward: sequence longer than n_max");
  if (train && cfg_.dropout > 0.0 && dropout_rng == nullptr)
    throw std::invalid_argument("TrajTransformer::forward: training needs a dropout rng");

  Tensor in(L, cfg_.in_dim);
  for (int i = 0; i < L; ++i)
    for (int d = 0; d < cfg_.in_dim; ++d) in.at(i, d) = actions[i][d];
  Tensor pe_rows(L, cfg_.d_model);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < cfg_.d_model; ++j) pe_rows.at(i, j) = pe_.at(i, j);

  const bool drop = train && cfg_.dropout > 0.0;
  Var x = tape.add_bias(tape.matmul(tape.leaf(in), leaves[id_input_w()]), leaves[id_input_b()]);
  x = tape.add(x, tape.leaf(pe_rows));
  if (drop) x = tape.dropout(x, cfg_.dropout, *dropout_rng);

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg_.d_head));
  for (int b = 0; b < cfg_.blocks; ++b) {
    std::vector<Var> heads(cfg_.heads);
    for (int h = 0; h < cfg_.heads; ++h) {
      Var q = tape.matmul(x, leaves[id_wq(b, h)]);
      Var k = tape.matmul(x, leaves[id_wk(b, h)]);
      Var v = tape.matmul(x, leaves[id_wv(b, h)]);
      Var scores = tape.scale(tape.matmul(q, k, false, true), inv_sqrt_dk);
      heads[h] = tape.matmul(tape.softmax_causal(scores), v);
    }
    Var attn = tape.matmul(tape.concat_cols(heads), leaves[id_wo(b)]);
    if (drop) attn = tape.dropout(attn, cfg_.dropout, *dropout_rng);
    x = tape.add_bias(tape.mul_bias(tape.layer_norm_rows(tape.add(x, attn)), leaves[id_ln1_g(b)]),
                      leaves[id_ln1_b(b)]);
    if (cfg_.use_ffn) {
      Var f = tape.relu(tape.add_bias(tape.matmul(x, leaves[id_ffn_w1(b)]), leaves[id_ffn_b1(b)]));
      f = tape.add_bias(tape.matmul(f, leaves[id_ffn_w2(b)]), leaves[id_ffn_b2(b)]);
      if (drop) f = tape.dropout(f, cfg_.dropout, *dropout_rng);
      x = tape.add_bias(tape.mul_bias(tape.layer_norm_rows(tape.add(x, f)), leaves[id_ln2_g(b)]),
                        leaves[id_ln2_b(b)]);
    }
  }
  return tape.add_bias(tape.matmul(x, leaves[id_head_w()]), leaves[id_head_b()]);
}

std::pair<Var, int> TrajTransformer::nll_parts(Tape& tape, Var outputs,
                                               const ActionSeq& actions) const {
  const int L = static_cast<int>(actions.size());
  if (L < 2) throw std::invalid_argument("sequence_nll: need at least two actions");
  Tensor targets(L - 1, 2);
  for (int i = 0; i < L - 1; ++i) {
    targets.at(i, 0) = actions[i + 1][0];
    targets.at(i, 1) = actions[i + 1][1];
  }
  Var preds = tape.slice_rows(outputs, 0, L - 1);
  Var mu = tape.slice_cols(preds, 0, 2);
  Var lv = tape.clamp(tape.slice_cols(preds, 2, 4), cfg_.logvar_min, cfg_.logvar_max);
  Var d = tape.sub(mu, tape.leaf(targets));
  Var term = tape.add(lv, tape.mul(tape.mul(d, d), tape.exp_(tape.scale(lv, -1.0))));
  // + ln(2*pi) per predicted scalar, folded in after the reduction
  Var s = tape.add_const(tape.sum_all(term), 2.0 * (L - 1) * kLn2Pi);
  return {s, L - 1};
}

Var TrajTransformer::sequence_nll(Tape& tape, Var outputs, const ActionSeq& actions) const {
  auto [s, n] = nll_parts(tape, outputs, actions);
  return tape.scale(s, 1.0 / (2.0 * n));
}

TrainHistory TrajTransformer::train(const std::vector<ActionSeq>& train_seqs,
                                    const std::vector<ActionSeq>& val_seqs,
                                    const TransformerTrainConfig& tc) {
  if (train_seqs.empty()) throw std::invalid_argument("train: no training sequences");
  Rng rng(tc.seed);
  TrainHistory hist;
  std::vector<Tensor> best = params_.snapshot();
  hist.best_val = val_seqs.empty() ? 0.0 : eval_nll(val_seqs);
  hist.best_epoch = -1;  // initial weights unless an epoch improves validation

  std::vector<std::size_t> order(train_seqs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sum = 0.0;
    long epoch_pos = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch) {
      const std::size_t stop = std::min(order.size(), start + tc.batch);
      // Sequences are processed on per-sequence tapes with gradients summed
      // externally, which keeps peak memory at one sequence instead of one
      // batch while computing the identical batch update.
      long n_tot = 0;
      for (std::size_t s = start; s < stop; ++s)
        n_tot += static_cast<long>(train_seqs[order[s]].size()) - 1;
      if (n_tot <= 0) continue;
      auto grads = params_.grad_accumulators();
      double batch_sum = 0.0;
      for (std::size_t s = start; s < stop; ++s) {
        const ActionSeq& seq = train_seqs[order[s]];
        if (static_cast<int>(seq.size()) < 2) continue;
        Tape tape;
        const std::vector<Var> leaves = params_.bind(tape);
        Var out = forward(tape, leaves, seq, true, &rng);
        auto [sum_var, n_pos] = nll_parts(tape, out, seq);
        Var loss = tape.scale(sum_var, 1.0 / (2.0 * n_tot));
        batch_sum += tape.value(sum_var)[0];
        (void)n_pos;
        tape.backward(loss);
        for (int p = 0; p < params_.size(); ++p) {
          const Tensor g = tape.grad(leaves[p]);
          Tensor& acc = grads[p];
          for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
        }
      }
      // divergence aborts the run but keeps the best weights seen so far
      bool finite = std::isfinite(batch_sum);
      for (const Tensor& g : grads) finite = finite && g.all_finite();
      if (!finite) {
        params_.restore(best);
        hist.aborted = true;
        return hist;
      }
      params_.adam_update(grads, tc.lr);
      epoch_sum += batch_sum;
      epoch_pos += n_tot;
    }
    hist.train_nll.push_back(epoch_sum / (2.0 * epoch_pos));
    if (!val_seqs.empty()) {
      const double v = eval_nll(val_seqs);
      hist.val_nll.push_back(v);
      if (hist.best_epoch < 0 || v < hist.best_val) {
        hist.best_val = v;
        hist.best_epoch = epoch;
        best = params_.snapshot();
      }
    }
  }
  if (!val_seqs.empty()) params_.restore(best);
  return hist;
}

double TrajTransformer::eval_nll(const std::vector<ActionSeq>& seqs) const {
  double sum = 0.0;
  long n_pos = 0;
  for (const auto& seq : seqs) {
    if (seq.size() < 2) continue;
    EvalCache cache = make_cache();
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      const auto raw = step_raw(cache, seq[i]);
      for (int d = 0; d < 2; ++d) {
        const double lv = std::clamp(raw[2 + d], cfg_.logvar_min, cfg_.logvar_max);
        const double diff = seq[i + 1][d] - raw[d];
        sum += lv + diff * diff * std::exp(-lv) + kLn2Pi;
      }
      n_pos += 1;
    }
  }
  if (n_pos == 0) throw std::invalid_argument("eval_nll: no predictable positions");
  return sum / (2.0 * n_pos);
}

TrajTransformer::EvalCache TrajTransformer::make_cache() const {
  EvalCache c;
  c.k.reserve(cfg_.blocks * cfg_.heads);
  c.v.reserve(cfg_.blocks * cfg_.heads);
  for (int i = 0; i < cfg_.blocks * cfg_.heads; ++i) {
    c.k.push_back(Tensor(cfg_.n_max, cfg_.d_head));
    c.v.push_back(Tensor(cfg_.n_max, cfg_.d_head));
  }
  return c;
}

// Incremental forward for one position, numerically identical to the tape
// path: the same kernels run over the same row slices in the same order.
std::array<double, 4> TrajTransformer::step_raw(EvalCache& cache,
                                                const std::array<double, 2>& action) const {
  if (cache.len >= cfg_.n_max) throw std::invalid_argument("EvalCache: sequence exceeds n_max");
  const auto& ops = kern::active();
  const int d = cfg_.d_model, dh = cfg_.d_head, pos = cache.len;

  std::vector<double> x(d), tmp(d);
  {
    const Tensor& w = params_[id_input_w()].value;
    const Tensor& bias = params_[id_input_b()].value;
    const double a[2] = {action[0], action[1]};
    ops.gemm_nn(a, w.data(), x.data(), 1, cfg_.in_dim, d, false);
    for (int j = 0; j < d; ++j) x[j] += bias[j] + pe_.at(pos, j);
  }

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> q(dh), cat(cfg_.heads * dh), attn(d), scores(pos + 1);
  for (int b = 0; b < cfg_.blocks; ++b) {
    for (int h = 0; h < cfg_.heads; ++h) {
      Tensor& K = cache.k[b * cfg_.heads + h];
      Tensor& V = cache.v[b * cfg_.heads + h];
      ops.gemm_nn(x.data(), params_[id_wq(b, h)].value.data(), q.data(), 1, d, dh, false);
      ops.gemm_nn(x.data(), params_[id_wk(b, h)].value.data(), &K.at(pos, 0), 1, d, dh, false);
      ops.gemm_nn(x.data(), params_[id_wv(b, h)].value.data(), &V.at(pos, 0), 1, d, dh, false);
      // causal attention over the stored prefix, stabilized by the row max
      double mx = -1e300;
      for (int t = 0; t <= pos; ++t) {
        scores[t] = ops.dot(q.data(), &K.at(t, 0), dh) * inv_sqrt_dk;
        mx = std::max(mx, scores[t]);
      }
      double z = 0.0;
      for (int t = 0; t <= pos; ++t) {
        scores[t] = std::exp(scores[t] - mx);
        z += scores[t];
      }
      double* out = &cat[h * dh];
      std::fill(out, out + dh, 0.0);
      for (int t = 0; t <= pos; ++t) ops.axpy(scores[t] / z, &V.at(t, 0), out, dh);
    }
    ops.gemm_nn(cat.data(), params_[id_wo(b)].value.data(), attn.data(), 1, cfg_.heads * dh, d,
                false);
    for (int j = 0; j < d; ++j) tmp[j] = x[j] + attn[j];
    // row layer norm, then the learned affine
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += tmp[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (tmp[j] - mean) * (tmp[j] - mean);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    const Tensor& g1 = params_[id_ln1_g(b)].value;
    const Tensor& b1 = params_[id_ln1_b(b)].value;
    for (int j = 0; j < d; ++j) x[j] = (tmp[j] - mean) * inv * g1[j] + b1[j];

    if (cfg_.use_ffn) {
      std::vector<double> f(cfg_.d_ffn);
      ops.gemm_nn(x.data(), params_[id_ffn_w1(b)].value.data(), f.data(), 1, d, cfg_.d_ffn, false);
      const Tensor& fb1 = params_[id_ffn_b1(b)].value;
      for (int j = 0; j < cfg_.d_ffn; ++j) f[j] = std::max(0.0, f[j] + fb1[j]);
      ops.gemm_nn(f.data(), params_[id_ffn_w2(b)].value.data(), attn.data(), 1, cfg_.d_ffn, d,
                  false);
      const Tensor& fb2 = params_[id_ffn_b2(b)].value;
      for (int j = 0; j < d; ++j) tmp[j] = x[j] + attn[j] + fb2[j];
      double m2 = 0.0;
      for (int j = 0; j < d; ++j) m2 += tmp[j];
      m2 /= d;
      double v2 = 0.0;
      for (int j = 0; j < d; ++j) v2 += (tmp[j] - m2) * (tmp[j] - m2);
      v2 /= d;
      const double inv2 = 1.0 / std::sqrt(v2 + 1e-5);
      const Tensor& g2 = params_[id_ln2_g(b)].value;
      const Tensor& b2 = params_[id_ln2_b(b)].value;
      for (int j = 0; j < d; ++j) x[j] = (tmp[j] - m2) * inv2 * g2[j] + b2[j];
    }
  }

  std::array<double, 4> out{};
  std::vector<double> o(cfg_.out_dim);
  ops.gemm_nn(x.data(), params_[id_head_w()].value.data(), o.data(), 1, d, cfg_.out_dim, false);
  const Tensor& hb = params_[id_head_b()].value;
  for (int j = 0; j < cfg_.out_dim && j < 4; ++j) out[j] = o[j] + hb[j];
  cache.len += 1;
  return out;
}

std::array<double, 4> TrajTransformer::extend(EvalCache& cache,
                                              const std::array<double, 2>& action) const {
  const auto raw = step_raw(cache, action);
  std::array<double, 4> r{};
  r[0] = raw[0];
  r[1] = raw[1];
  r[2] = std::exp(std::clamp(raw[2], cfg_.logvar_min, cfg_.logvar_max));
  r[3] = std::exp(std::clamp(raw[3], cfg_.logvar_min, cfg_.logvar_max));
  return r;
}

std::array<double, 4> TrajTransformer::propose_next(const ActionSeq& history) const {
  if (history.empty()) throw std::invalid_argument("propose_next: empty history");
  EvalCache cache = make_cache();
  std::array<double, 4> r{};
  for (const auto& a : history) r = extend(cache, a);
  return r;
}

ActionSeq TrajTransformer::generate(const std::array<double, 2>& first, int n_actions,
                                    bool sample, Rng& rng) const {
  if (n_actions < 1) throw std::invalid_argument("generate: need n_actions >= 1");
  ActionSeq seq;
  seq.reserve(n_actions);
  seq.push_back(first);
  EvalCache cache = make_cache();
  while (static_cast<int>(seq.size()) < n_actions) {
    const auto p = extend(cache, seq.back());
    std::array<double, 2> next{};
    for (int dim = 0; dim < 2; ++dim) {
      double v = p[dim];
      if (sample) v += std::sqrt(p[2 + dim]) * rng.normal();
      next[dim] = std::clamp(v, 0.0, 1.0);
    }
    seq.push_back(next);
  }
  return seq;
}

}  // namespace evtol
