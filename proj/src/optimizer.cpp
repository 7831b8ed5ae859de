#include "evtol/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "evtol/parallel.hpp"
#include "evtol/rng.hpp"

namespace evtol {
namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

// symmetric Jacobi eigendecomposition: A = V diag(eig) V^T
void jacobi_eig(std::vector<double>& A, int n, std::vector<double>& eig,
                std::vector<double>& V) {
  V.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) V[static_cast<std::size_t>(i) * n + i] = 1.0;
  auto at = [&](std::vector<double>& M, int r, int c) -> double& {
    return M[static_cast<std::size_t>(r) * n + c];
  };
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += at(A, p, q) * at(A, p, q);
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(A, p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double app = at(A, p, p), aqq = at(A, q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(A, k, p), akq = at(A, k, q);
          at(A, k, p) = c * akp - s * akq;
          at(A, k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(A, p, k), aqk = at(A, q, k);
          at(A, p, k) = c * apk - s * aqk;
          at(A, q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = at(V, k, p), vkq = at(V, k, q);
          at(V, k, p) = c * vkp - s * vkq;
          at(V, k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  eig.resize(n);
  for (int i = 0; i < n; ++i) eig[i] = A[static_cast<std::size_t>(i) * n + i];
}

struct EvalOut {
  RolloutResult roll;
  Residuals res;
  double energy_obj = 0.0;       // scaled objective
  double box_pen = 0.0;
  std::vector<double> x_rep;     // repaired (clamped) point actually rolled out
};

}  // namespace

std::vector<FlightCondition> lhs_conditions(int n, std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("lhs_conditions: n must be positive");
  Rng rng(seed);
  constexpr int kDims = 5;
  const double lo[kDims] = {10.0, 0.2, 0.3, 0.7, 0.9};
  const double hi[kDims] = {15.0, 0.4, 1.0, 0.9, 1.0};
  std::array<std::vector<int>, kDims> perms;
  for (auto& p : perms) {
    p.resize(n);
    std::iota(p.begin(), p.end(), 0);
    rng.shuffle(p);
  }
  std::vector<FlightCondition> out(n);
  for (int i = 0; i < n; ++i) {
    double v[kDims];
    for (int d = 0; d < kDims; ++d) {
      const double cell = (perms[d][i] + rng.uniform()) / n;
      v[d] = lo[d] + cell * (hi[d] - lo[d]);
    }
    out[i] = FlightCondition{v[0], v[1], v[2], v[3], v[4]};
  }
  return out;
}

std::vector<double> RefDesign::flat() const {
  std::vector<double> x;
  x.reserve(p01.size() + th01.size() + 1);
  x.insert(x.end(), p01.begin(), p01.end());
  x.insert(x.end(), th01.begin(), th01.end());
  x.push_back(T01);
  return x;
}

RefDesign RefDesign::unflat(const std::vector<double>& x, int n_ctrl) {
  if (static_cast<int>(x.size()) != 2 * n_ctrl + 1)
    throw std::invalid_argument("RefDesign::unflat: wrong length");
  RefDesign d;
  d.p01.assign(x.begin(), x.begin() + n_ctrl);
  d.th01.assign(x.begin() + n_ctrl, x.begin() + 2 * n_ctrl);
  d.T01 = x.back();
  return d;
}

EnvConfig apply_condition(EnvConfig env_cfg, const FlightCondition& cond) {
  env_cfg.vehicle.k_w = cond.k_w;
  env_cfg.vehicle.eta = cond.eta;
  env_cfg.vehicle.S_ref = cond.S_ref;
  return env_cfg;
}

RolloutResult rollout_schedule(const RefDesign& d, const OptimizerConfig& ocfg,
                               const EnvConfig& env_cfg) {
  const double T = ocfg.duration_of(std::clamp(d.T01, 1e-6, 1.0));
  const BSpline ps(d.p01, T);
  const BSpline ths(d.th01, T);
  const int n_steps = static_cast<int>(std::ceil(T / env_cfg.dt - 1e-9));

  RolloutResult r;
  VehicleState s;
  s.y = env_cfg.init_y;
  s.vx = env_cfg.init_vx;
  s.vy = env_cfg.init_vy;
  r.min_y = s.y;
  double energy_J = 0.0;
  const double inv_g = 1.0 / env_cfg.vehicle.gravity;
  for (int k = 0; k < n_steps; ++k) {
    const double t = std::min(k * env_cfg.dt, T);
    const double p01 = std::clamp(ps.eval(t), 0.0, 1.0);
    const double th01 = std::clamp(ths.eval(t), 0.0, 1.0);
    ControlInput u;
    u.power_W = env_cfg.p_min + p01 * (env_cfg.p_max - env_cfg.p_min);
    u.theta_rad = env_cfg.theta_min + th01 * (env_cfg.theta_max - env_cfg.theta_min);
    ForceBreakdown f;
    s = step_dynamics(s, u, env_cfg.dt, env_cfg.vehicle, &f);
    energy_J += u.power_W * env_cfg.dt;
    if (!std::isfinite(s.vx) || !std::isfinite(s.vy) || !std::isfinite(s.y)) {
      r.finite = false;
      r.steps = k + 1;
      break;
    }
    r.min_y = std::min(r.min_y, s.y);
    r.max_alpha_efs = std::max(r.max_alpha_efs, std::abs(f.efs.alpha_efs));
    r.max_accel_g = std::max(r.max_accel_g, std::hypot(f.ax, f.ay) * inv_g);
    r.steps = k + 1;
  }
  r.energy_Wh = energy_J / 3600.0;
  r.y_final = s.y;
  r.vx_final = s.vx;
  r.final_state = s;
  return r;
}

RolloutResult rollout_controls(const std::vector<std::array<double, 2>>& controls01,
                               const EnvConfig& env_cfg) {
  RolloutResult r;
  VehicleState s;
  s.y = env_cfg.init_y;
  s.vx = env_cfg.init_vx;
  s.vy = env_cfg.init_vy;
  r.min_y = s.y;
  double energy_J = 0.0;
  const double inv_g = 1.0 / env_cfg.vehicle.gravity;
  for (std::size_t k = 0; k < controls01.size(); ++k) {
    ControlInput u;
    const double p01 = std::clamp(controls01[k][0], 0.0, 1.0);
    const double th01 = std::clamp(controls01[k][1], 0.0, 1.0);
    u.power_W = env_cfg.p_min + p01 * (env_cfg.p_max - env_cfg.p_min);
    u.theta_rad = env_cfg.theta_min + th01 * (env_cfg.theta_max - env_cfg.theta_min);
    ForceBreakdown f;
    s = step_dynamics(s, u, env_cfg.dt, env_cfg.vehicle, &f);
    energy_J += u.power_W * env_cfg.dt;
    if (!std::isfinite(s.vx) || !std::isfinite(s.vy) || !std::isfinite(s.y)) {
      r.finite = false;
      r.steps = static_cast<int>(k) + 1;
      break;
    }
    r.min_y = std::min(r.min_y, s.y);
    r.max_alpha_efs = std::max(r.max_alpha_efs, std::abs(f.efs.alpha_efs));
    r.max_accel_g = std::max(r.max_accel_g, std::hypot(f.ax, f.ay) * inv_g);
    r.steps = static_cast<int>(k) + 1;
  }
  r.energy_Wh = energy_J / 3600.0;
  r.y_final = s.y;
  r.vx_final = s.vx;
  r.final_state = s;
  return r;
}

double Residuals::max_scaled() const {
  double m = 0.0;
  m = std::max(m, alt / 305.0);
  m = std::max(m, vx / 67.0);
  m = std::max(m, ground);
  m = std::max(m, alpha);
  m = std::max(m, accel);
  return m;
}

Residuals residuals_of(const RolloutResult& r, const FlightCondition& cond,
                       const OptimizerConfig& ocfg, const EnvConfig& env_cfg) {
  Residuals res;
  if (!r.finite) {
    res.alt = env_cfg.target_y;
    res.vx = env_cfg.target_vx;
    res.ground = 1.0;
    return res;
  }
  res.alt = std::max(0.0, env_cfg.target_y - r.y_final);
  res.vx = std::max(0.0, env_cfg.target_vx - r.vx_final);
  res.ground = std::max(0.0, -r.min_y);
  if (ocfg.path_constraints) {
    res.alpha = std::max(0.0, r.max_alpha_efs - cond.alpha_max_deg * kDeg);
    res.accel = std::max(0.0, r.max_accel_g - cond.a_max_g);
  }
  return res;
}

bool is_feasible(const Residuals& res, const OptimizerConfig& ocfg) {
  return res.alt <= ocfg.tol_alt && res.vx <= ocfg.tol_vx && res.ground <= ocfg.tol_ground &&
         res.alpha <= ocfg.tol_alpha && res.accel <= ocfg.tol_accel;
}

ReferenceResult optimize_reference(const FlightCondition& cond, const OptimizerConfig& ocfg,
                                   EnvConfig env_cfg, std::uint64_t seed) {
  if (ocfg.max_rollouts <= 0) throw std::invalid_argument("optimize_reference: budget must be > 0");
  env_cfg = apply_condition(env_cfg, cond);
  const int n_ctrl = ocfg.n_ctrl;
  const int dim = 2 * n_ctrl + 1;

  // normalized constraint residual vector for the augmented Lagrangian
  auto scaled_g = [&](const Residuals& r) {
    return std::array<double, 5>{r.alt / 305.0, r.vx / 67.0, r.ground, r.alpha, r.accel};
  };

  int rollouts = 0;
  // Energy falls with duration along the feasible frontier, so the loop keeps
  // a duration cap: it starts just above the initial guess (long durations
  // are easy but expensive, and a free search drifts there), then marches
  // downward (continuation) once feasible, the inner solver restoring
  // feasibility under each tighter cap.  A stalled cap is released.
  constexpr double kCapHeadroomS = 2.0;
  double T01_cap = std::clamp(
      (ocfg.init_T + kCapHeadroomS - ocfg.T_min) / (ocfg.T_max - ocfg.T_min), 1e-6, 1.0);
  auto evaluate = [&](const std::vector<double>& x_raw) {
    EvalOut e;
    std::vector<double> x = x_raw;
    double pen = 0.0;
    for (double& v : x) {
      const double c = std::clamp(v, 0.0, 1.0);
      pen += (v - c) * (v - c);
      v = c;
    }
    {
      double& t01 = x.back();
      const double c = std::clamp(t01, 1e-6, T01_cap);
      pen += (t01 - c) * (t01 - c);
      t01 = c;
    }
    const RefDesign d = RefDesign::unflat(x, n_ctrl);
    e.roll = rollout_schedule(d, ocfg, env_cfg);
    e.res = residuals_of(e.roll, cond, ocfg, env_cfg);
    e.energy_obj = e.roll.finite ? e.roll.energy_Wh / 1000.0 : 10.0;
    e.box_pen = 100.0 * pen;
    e.x_rep = std::move(x);
    return e;
  };

  // initial mean: constant power, linear tilt ramp, mid-range duration
  std::vector<double> mean(dim);
  const double p0 = (ocfg.init_power_W - env_cfg.p_min) / (env_cfg.p_max - env_cfg.p_min);
  const double th_hi = ocfg.init_theta_hi_deg * kDeg / (env_cfg.theta_max - env_cfg.theta_min);
  for (int i = 0; i < n_ctrl; ++i) {
    mean[i] = std::clamp(p0, 0.0, 1.0);
    mean[n_ctrl + i] = std::clamp(th_hi * i / (n_ctrl - 1.0), 0.0, 1.0);
  }
  mean[dim - 1] = std::clamp((ocfg.init_T - ocfg.T_min) / (ocfg.T_max - ocfg.T_min), 1e-6, 1.0);

  // multipliers and penalty weight for the 5 scaled constraints
  std::array<double, 5> lambda{};
  double c_pen = ocfg.penalty_init;

  auto lagrangian = [&](const EvalOut& e) {
    const auto g = scaled_g(e.res);
    double L = e.energy_obj + e.box_pen;
    for (int i = 0; i < 5; ++i) {
      const double s = std::max(0.0, lambda[i] / c_pen + g[i]);
      L += 0.5 * c_pen * (s * s - (lambda[i] / c_pen) * (lambda[i] / c_pen));
    }
    return L;
  };

  // track the best feasible (by energy) and best overall (by violation, energy)
  ReferenceResult best;
  best.feasible = false;
  double best_energy = 1e300;
  double best_infeas_score = 1e300;
  auto consider = [&](const std::vector<double>& x, const EvalOut& e) {
    const bool feas = e.roll.finite && is_feasible(e.res, ocfg);
    if (feas) {
      if (!best.feasible || e.roll.energy_Wh < best_energy) {
        best.feasible = true;
        best_energy = e.roll.energy_Wh;
        best.design = RefDesign::unflat(x, n_ctrl);
        best.design.T01 = std::clamp(best.design.T01, 1e-6, 1.0);
        best.rollout = e.roll;
        best.residuals = e.res;
      }
    } else if (!best.feasible) {
      const double score = e.res.max_scaled() * 1e6 + e.energy_obj;
      if (score < best_infeas_score) {
        best_infeas_score = score;
        best.design = RefDesign::unflat(x, n_ctrl);
        best.design.T01 = std::clamp(best.design.T01, 1e-6, 1.0);
        best.rollout = e.roll;
        best.residuals = e.res;
      }
    }
  };

  {
    EvalOut e0 = evaluate(mean);
    ++rollouts;
    consider(e0.x_rep, e0);
  }

  // rank-mu evolution strategy state
  const int lambda_pop = ocfg.population;
  const int mu = lambda_pop / 2;
  std::vector<double> w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& wi : w) wi /= wsum;
  const double mu_eff = 1.0 / std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
  const double c_sigma = (mu_eff + 2.0) / (dim + mu_eff + 5.0);
  const double d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (dim + 1.0)) - 1.0) + c_sigma;
  // rank-1 term tracks the persistent search direction (the long energy
  // valley in duration/power); rank-mu shapes the local cloud
  const double c_c = (4.0 + mu_eff / dim) / (dim + 4.0 + 2.0 * mu_eff / dim);
  const double c_1 = 2.0 / ((dim + 1.3) * (dim + 1.3) + mu_eff);
  const double c_mu =
      std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dim + 2.0) * (dim + 2.0) + mu_eff));
  const double chi_n = std::sqrt(static_cast<double>(dim)) *
                       (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim * dim));

  double sigma = ocfg.sigma0;
  std::vector<double> C(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) C[static_cast<std::size_t>(i) * dim + i] = 1.0;
  std::vector<double> p_sigma(dim, 0.0);
  std::vector<double> p_c(dim, 0.0);
  std::vector<double> eigval, eigvec;
  {
    std::vector<double> A = C;
    jacobi_eig(A, dim, eigval, eigvec);
  }

  Rng rng(seed);
  std::vector<std::vector<double>> xs(lambda_pop), zs(lambda_pop);
  std::vector<EvalOut> outs(lambda_pop);
  std::vector<double> fitness(lambda_pop);
  std::vector<int> order(lambda_pop);

  double prev_max_violation = 1e300;
  int stale_feasible_iters = 0;
  int cap_stalls = 0;
  int cold_phases = 0;
  constexpr double kCapBite = 0.01;      // cap step, in normalized duration units
  constexpr int kCapPatience = 6;        // failed bites before pinning at the incumbent
  constexpr int kColdPatience = 15;      // infeasible phases before releasing the cap
  constexpr double kStallSigma = 0.08;   // re-inflated step size after a pin
  constexpr double kSigmaFloor = 0.02;   // keeps late-stage sampling alive near the frontier

  while (rollouts + lambda_pop <= ocfg.max_rollouts) {
    // one augmented-Lagrangian iteration = inner_gens ES generations
    std::vector<double> phase_best_x;
    EvalOut phase_best_e;
    double phase_best_L = 1e300;

    for (int gen = 0; gen < ocfg.inner_gens && rollouts + lambda_pop <= ocfg.max_rollouts;
         ++gen) {
      for (int i = 0; i < lambda_pop; ++i) {
        zs[i].resize(dim);
        for (int d = 0; d < dim; ++d) zs[i][d] = rng.normal();
        xs[i] = mean;
        // x = mean + sigma * B * D * z
        for (int d = 0; d < dim; ++d) {
          const double sd = std::sqrt(std::max(eigval[d], 1e-20));
          const double zd = zs[i][d] * sd;
          for (int rix = 0; rix < dim; ++rix)
            xs[i][rix] += sigma * eigvec[static_cast<std::size_t>(rix) * dim + d] * zd;
        }
      }
      parallel_for(lambda_pop, [&](int i) { outs[i] = evaluate(xs[i]); });
      rollouts += lambda_pop;
      for (int i = 0; i < lambda_pop; ++i) {
        fitness[i] = lagrangian(outs[i]);
        consider(outs[i].x_rep, outs[i]);
        if (fitness[i] < phase_best_L) {
          phase_best_L = fitness[i];
          phase_best_x = outs[i].x_rep;  // the point actually rolled out
          phase_best_e = outs[i];
        }
      }
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(),
                [&](int a, int b) { return fitness[a] < fitness[b]; });

      std::vector<double> new_mean(dim, 0.0);
      for (int r = 0; r < mu; ++r)
        for (int d = 0; d < dim; ++d) new_mean[d] += w[r] * xs[order[r]][d];

      // cumulative step-size path uses C^{-1/2} (m' - m) / sigma
      std::vector<double> delta(dim);
      for (int d = 0; d < dim; ++d) delta[d] = (new_mean[d] - mean[d]) / sigma;
      std::vector<double> cinv_delta(dim, 0.0);
      for (int d = 0; d < dim; ++d) {
        double proj = 0.0;
        for (int rix = 0; rix < dim; ++rix)
          proj += eigvec[static_cast<std::size_t>(rix) * dim + d] * delta[rix];
        proj /= std::sqrt(std::max(eigval[d], 1e-20));
        for (int rix = 0; rix < dim; ++rix)
          cinv_delta[rix] += eigvec[static_cast<std::size_t>(rix) * dim + d] * proj;
      }
      double pnorm2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        p_sigma[d] = (1.0 - c_sigma) * p_sigma[d] +
                     std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * cinv_delta[d];
        pnorm2 += p_sigma[d] * p_sigma[d];
      }
      sigma *= std::exp(c_sigma / d_sigma * (std::sqrt(pnorm2) / chi_n - 1.0));
      sigma = std::clamp(sigma, 1e-8, 1.0);
      // once feasible, energy descent runs along active constraints; a floor
      // keeps the sampler from collapsing onto that ridge and going deaf
      if (best.feasible) sigma = std::max(sigma, kSigmaFloor);

      // direction path; the stall guard keeps a noisy step-size spike from
      // inflating the covariance with a spurious direction
      const bool hsig = pnorm2 / (1.0 - std::pow(1.0 - c_sigma, 2.0 * (gen + 1))) / dim <
                        (2.0 + 4.0 / (dim + 1.0)) * chi_n * chi_n / dim;
      for (int d = 0; d < dim; ++d) {
        p_c[d] = (1.0 - c_c) * p_c[d] +
                 (hsig ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) * delta[d] : 0.0);
      }

      // covariance: decay, rank-1 from the direction path, rank-mu from the
      // selected steps
      const double c1_eff = c_1 * (hsig ? 1.0 : 1.0 - c_c * (2.0 - c_c));
      for (std::size_t t = 0; t < C.size(); ++t) C[t] *= (1.0 - c1_eff - c_mu);
      for (int a = 0; a < dim; ++a) {
        const double pa = c_1 * p_c[a];
        double* Crow = C.data() + static_cast<std::size_t>(a) * dim;
        for (int bcol = 0; bcol < dim; ++bcol) Crow[bcol] += pa * p_c[bcol];
      }
      for (int r = 0; r < mu; ++r) {
        const auto& xi = xs[order[r]];
        std::vector<double> y(dim);
        for (int d = 0; d < dim; ++d) y[d] = (xi[d] - mean[d]) / sigma;
        const double cw = c_mu * w[r];
        for (int a = 0; a < dim; ++a) {
          const double ya = cw * y[a];
          double* Crow = C.data() + static_cast<std::size_t>(a) * dim;
          for (int bcol = 0; bcol < dim; ++bcol) Crow[bcol] += ya * y[bcol];
        }
      }
      mean = new_mean;
      {
        std::vector<double> A = C;
        jacobi_eig(A, dim, eigval, eigvec);
      }
    }

    if (phase_best_x.empty()) break;

    // multiplier update at the phase's best point; grow the penalty when the
    // worst violation fails to halve
    const auto g = scaled_g(phase_best_e.res);
    double max_violation = 0.0;
    for (int i = 0; i < 5; ++i) {
      lambda[i] = std::max(0.0, lambda[i] + c_pen * g[i]);
      max_violation = std::max(max_violation, g[i]);
    }
    if (max_violation > 0.5 * prev_max_violation)
      c_pen = std::min(c_pen * ocfg.penalty_growth, ocfg.penalty_max);
    prev_max_violation = max_violation;

    // recenter the search on the phase best to keep progress monotone-ish
    mean = phase_best_x;
    for (double& v : mean) v = std::clamp(v, 0.0, 1.0);
    mean.back() = std::clamp(mean.back(), 1e-6, T01_cap);

    // greedy duration/power line search from the incumbent: shorter duration
    // with uniformly boosted power is the known descent move along the energy
    // valley, and it rides far faster than the sampled cloud
    if (best.feasible) {
      bool any_improved = false;
      for (int round = 0; round < 5; ++round) {
        const double e_before = best_energy;
        const std::vector<double> base = best.design.flat();
        std::vector<std::vector<double>> cands;
        const int half = n_ctrl / 2;
        for (double dT : {0.005, 0.01, 0.02}) {
          for (double boost : {0.0, 1.0, 2.0, 4.0}) {
            // uniform power boost compensating the cut
            std::vector<double> x = base;
            x.back() = std::max(x.back() - dT, 1e-6);
            for (int i = 0; i < n_ctrl; ++i)
              x[i] = std::clamp(x[i] + boost * dT, 0.0, 1.0);
            cands.push_back(std::move(x));
            if (boost == 0.0) continue;
            // late-half boost only: the acceleration ceiling binds early,
            // while the fast wing-borne phase has slack
            x = base;
            x.back() = std::max(x.back() - dT, 1e-6);
            for (int i = half; i < n_ctrl; ++i)
              x[i] = std::clamp(x[i] + 2.0 * boost * dT, 0.0, 1.0);
            cands.push_back(std::move(x));
            // late tilt-forward: trades climb for horizontal acceleration
            x = base;
            x.back() = std::max(x.back() - dT, 1e-6);
            for (int i = half; i < n_ctrl; ++i)
              x[n_ctrl + i] = std::clamp(x[n_ctrl + i] + boost * dT, 0.0, 1.0);
            cands.push_back(std::move(x));
          }
        }
        for (double dp : {0.01, 0.02, 0.04}) {  // power polish at fixed duration
          std::vector<double> x = base;
          for (int i = 0; i < n_ctrl; ++i) x[i] = std::clamp(x[i] - dp, 0.0, 1.0);
          cands.push_back(std::move(x));
          x = base;  // early-half polish: the slow phase overspends most often
          for (int i = 0; i < half; ++i) x[i] = std::clamp(x[i] - dp, 0.0, 1.0);
          cands.push_back(std::move(x));
        }
        if (rollouts + static_cast<int>(cands.size()) > ocfg.max_rollouts) break;
        for (const auto& x : cands) {
          EvalOut e = evaluate(x);
          ++rollouts;
          consider(e.x_rep, e);
        }
        if (best_energy >= e_before - 1e-9) break;
        any_improved = true;
      }
      if (any_improved) {
        mean = best.design.flat();
        for (double& v : mean) v = std::clamp(v, 0.0, 1.0);
        mean.back() = std::clamp(mean.back(), 1e-6, T01_cap);
      }
    }

    // duration continuation: once feasible, bite the cap down just below the
    // incumbent so the next phases must restore feasibility at a shorter
    // (cheaper) duration; two consecutive failed bites release the cap
    if (best.feasible && cap_stalls < kCapPatience) {
      const double bestT01 = std::clamp(best.design.T01, 1e-6, 1.0);
      if (bestT01 <= T01_cap + 1e-12) {
        T01_cap = std::max(bestT01 - kCapBite, 1e-6);
        mean.back() = std::min(mean.back(), T01_cap);
        cap_stalls = 0;  // only consecutive failures pin the cap
      } else if (++cap_stalls >= kCapPatience) {
        // restoration below the incumbent keeps failing: pin the cap at the
        // incumbent duration and re-inflate the step size so the search can
        // re-shape the schedule instead of drifting longer
        T01_cap = bestT01;
        mean = best.design.flat();
        for (double& v : mean) v = std::clamp(v, 0.0, 1.0);
        mean.back() = std::clamp(mean.back(), 1e-6, T01_cap);
        sigma = std::max(sigma, kStallSigma);
        std::fill(p_sigma.begin(), p_sigma.end(), 0.0);
        std::fill(p_c.begin(), p_c.end(), 0.0);
        cap_stalls = 0;
      }
    } else if (!best.feasible && ++cold_phases >= kColdPatience && T01_cap < 1.0) {
      T01_cap = 1.0;  // initial cap proved too tight to reach feasibility at all
    }

    if (best.feasible) {
      if (++stale_feasible_iters > 1000) break;  // effectively: run out the budget
    }
  }

  best.rollouts_used = rollouts;
  best.duration = ocfg.duration_of(std::clamp(best.design.T01, 1e-6, 1.0));
  return best;
}

}  // namespace evtol
