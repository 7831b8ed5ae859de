#include "evtol/config_io.hpp"

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

namespace evtol {
namespace {

// Tracks which keys of an object were consumed; anything left over is a typo.
class Reader {
 public:
  Reader(const ojson& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) {
      throw std::invalid_argument(context_ + ": expected a JSON object");
    }
  }

  template <typename T>
  void get(const char* name, T& dst) {
    auto it = j_.find(name);
    if (it == j_.end()) return;
    try {
      dst = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(context_ + "." + name + ": " + e.what());
    }
    seen_.insert(name);
  }

  void get_enum(const char* name, ObsMode& dst) {
    auto it = j_.find(name);
    if (it == j_.end()) return;
    const std::string s = it->get<std::string>();
    if (s == "vanilla") {
      dst = ObsMode::kVanilla;
    } else if (s == "guided") {
      dst = ObsMode::kGuided;
    } else {
      throw std::invalid_argument(context_ + "." + name + ": expected \"vanilla\" or \"guided\", got \"" + s + "\"");
    }
    seen_.insert(name);
  }

  // Hands a nested object to `fn` and marks the key consumed.
  template <typename Fn>
  void sub(const char* name, Fn&& fn) {
    auto it = j_.find(name);
    if (it == j_.end()) return;
    fn(*it);
    seen_.insert(name);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw std::invalid_argument(context_ + ": unknown field \"" + it.key() + "\"");
      }
    }
  }

 private:
  const ojson& j_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace

ojson vehicle_to_json(const VehicleConfig& c) {
  ojson j;
  j["b_m"] = c.b_m;
  j["c_m"] = c.c_m;
  j["AR"] = c.AR;
  j["t_over_c"] = c.t_over_c;
  j["wings"] = c.wings;
  j["S_ref"] = c.S_ref;
  j["span_eff"] = c.span_eff;
  j["alpha_s_deg"] = c.alpha_s_deg;
  j["C_Ds"] = c.C_Ds;
  j["prestall_cd"] = c.prestall_cd;
  j["rho_KS"] = c.rho_KS;
  j["n_props"] = c.n_props;
  j["R_m"] = c.R_m;
  j["blades"] = c.blades;
  j["c_b_m"] = c.c_b_m;
  j["Omega"] = c.Omega;
  j["sigma"] = c.sigma;
  j["C_d0p"] = c.C_d0p;
  j["kappa"] = c.kappa;
  j["eta"] = c.eta;
  j["k_w"] = c.k_w;
  j["beta_max_deg"] = c.beta_max_deg;
  j["v_beta_max"] = c.v_beta_max;
  j["beta_offset_deg"] = c.beta_offset_deg;
  j["mass_kg"] = c.mass_kg;
  j["gravity"] = c.gravity;
  j["rho_air"] = c.rho_air;
  j["fuse_drag_area"] = c.fuse_drag_area;
  j["momentum_consistent"] = c.momentum_consistent;
  j["lift_sign_as_printed"] = c.lift_sign_as_printed;
  return j;
}

VehicleConfig vehicle_from_json(const ojson& j) {
  VehicleConfig c;
  Reader r(j, "vehicle");
  r.get("b_m", c.b_m);
  r.get("c_m", c.c_m);
  r.get("AR", c.AR);
  r.get("t_over_c", c.t_over_c);
  r.get("wings", c.wings);
  r.get("S_ref", c.S_ref);
  r.get("span_eff", c.span_eff);
  r.get("alpha_s_deg", c.alpha_s_deg);
  r.get("C_Ds", c.C_Ds);
  r.get("prestall_cd", c.prestall_cd);
  r.get("rho_KS", c.rho_KS);
  r.get("n_props", c.n_props);
  r.get("R_m", c.R_m);
  r.get("blades", c.blades);
  r.get("c_b_m", c.c_b_m);
  r.get("Omega", c.Omega);
  r.get("sigma", c.sigma);
  r.get("C_d0p", c.C_d0p);
  r.get("kappa", c.kappa);
  r.get("eta", c.eta);
  r.get("k_w", c.k_w);
  r.get("beta_max_deg", c.beta_max_deg);
  r.get("v_beta_max", c.v_beta_max);
  r.get("beta_offset_deg", c.beta_offset_deg);
  r.get("mass_kg", c.mass_kg);
  r.get("gravity", c.gravity);
  r.get("rho_air", c.rho_air);
  r.get("fuse_drag_area", c.fuse_drag_area);
  r.get("momentum_consistent", c.momentum_consistent);
  r.get("lift_sign_as_printed", c.lift_sign_as_printed);
  r.finish();
  return c;
}

ojson env_to_json(const EnvConfig& c) {
  ojson j;
  j["vehicle"] = vehicle_to_json(c.vehicle);
  j["dt"] = c.dt;
  j["t_max"] = c.t_max;
  j["target_y"] = c.target_y;
  j["target_vx"] = c.target_vx;
  j["init_y"] = c.init_y;
  j["init_vx"] = c.init_vx;
  j["init_vy"] = c.init_vy;
  j["p_min"] = c.p_min;
  j["p_max"] = c.p_max;
  j["theta_min"] = c.theta_min;
  j["theta_max"] = c.theta_max;
  j["k"] = c.k;
  j["cc"] = c.cc;
  j["rho_w"] = c.rho_w;
  j["p_norm"] = c.p_norm;
  j["obs_padding"] = c.obs_padding;
  j["obs_mode"] = c.obs_mode == ObsMode::kGuided ? "guided" : "vanilla";
  return j;
}

EnvConfig env_from_json(const ojson& j) {
  EnvConfig c;
  Reader r(j, "env");
  r.sub("vehicle", [&](const ojson& v) { c.vehicle = vehicle_from_json(v); });
  r.get("dt", c.dt);
  r.get("t_max", c.t_max);
  r.get("target_y", c.target_y);
  r.get("target_vx", c.target_vx);
  r.get("init_y", c.init_y);
  r.get("init_vx", c.init_vx);
  r.get("init_vy", c.init_vy);
  r.get("p_min", c.p_min);
  r.get("p_max", c.p_max);
  r.get("theta_min", c.theta_min);
  r.get("theta_max", c.theta_max);
  r.get("k", c.k);
  r.get("cc", c.cc);
  r.get("rho_w", c.rho_w);
  r.get("p_norm", c.p_norm);
  r.get("obs_padding", c.obs_padding);
  r.get_enum("obs_mode", c.obs_mode);
  r.finish();
  return c;
}

ojson optimizer_to_json(const OptimizerConfig& c) {
  ojson j;
  j["n_ctrl"] = c.n_ctrl;
  j["T_min"] = c.T_min;
  j["T_max"] = c.T_max;
  j["population"] = c.population;
  j["max_rollouts"] = c.max_rollouts;
  j["penalty_init"] = c.penalty_init;
  j["penalty_growth"] = c.penalty_growth;
  j["penalty_max"] = c.penalty_max;
  j["inner_gens"] = c.inner_gens;
  j["sigma0"] = c.sigma0;
  j["path_constraints"] = c.path_constraints;
  j["tol_alt"] = c.tol_alt;
  j["tol_vx"] = c.tol_vx;
  j["tol_ground"] = c.tol_ground;
  j["tol_alpha"] = c.tol_alpha;
  j["tol_accel"] = c.tol_accel;
  j["init_power_W"] = c.init_power_W;
  j["init_theta_hi_deg"] = c.init_theta_hi_deg;
  j["init_T"] = c.init_T;
  return j;
}

OptimizerConfig optimizer_from_json(const ojson& j) {
  OptimizerConfig c;
  Reader r(j, "optimizer");
  r.get("n_ctrl", c.n_ctrl);
  r.get("T_min", c.T_min);
  r.get("T_max", c.T_max);
  r.get("population", c.population);
  r.get("max_rollouts", c.max_rollouts);
  r.get("penalty_init", c.penalty_init);
  r.get("penalty_growth", c.penalty_growth);
  r.get("penalty_max", c.penalty_max);
  r.get("inner_gens", c.inner_gens);
  r.get("sigma0", c.sigma0);
  r.get("path_constraints", c.path_constraints);
  r.get("tol_alt", c.tol_alt);
  r.get("tol_vx", c.tol_vx);
  r.get("tol_ground", c.tol_ground);
  r.get("tol_alpha", c.tol_alpha);
  r.get("tol_accel", c.tol_accel);
  r.get("init_power_W", c.init_power_W);
  r.get("init_theta_hi_deg", c.init_theta_hi_deg);
  r.get("init_T", c.init_T);
  r.finish();
  return c;
}

ojson transformer_to_json(const TransformerConfig& c) {
  ojson j;
  j["in_dim"] = c.in_dim;
  j["out_dim"] = c.out_dim;
  j["d_model"] = c.d_model;
  j["heads"] = c.heads;
  j["d_head"] = c.d_head;
  j["blocks"] = c.blocks;
  j["use_ffn"] = c.use_ffn;
  j["d_ffn"] = c.d_ffn;
  j["dropout"] = c.dropout;
  j["logvar_min"] = c.logvar_min;
  j["logvar_max"] = c.logvar_max;
  j["n_max"] = c.n_max;
  j["pe_base"] = c.pe_base;
  return j;
}

TransformerConfig transformer_from_json(const ojson& j) {
  TransformerConfig c;
  Reader r(j, "transformer");
  r.get("in_dim", c.in_dim);
  r.get("out_dim", c.out_dim);
  r.get("d_model", c.d_model);
  r.get("heads", c.heads);
  r.get("d_head", c.d_head);
  r.get("blocks", c.blocks);
  r.get("use_ffn", c.use_ffn);
  r.get("d_ffn", c.d_ffn);
  r.get("dropout", c.dropout);
  r.get("logvar_min", c.logvar_min);
  r.get("logvar_max", c.logvar_max);
  r.get("n_max", c.n_max);
  r.get("pe_base", c.pe_base);
  r.finish();
  return c;
}

ojson transformer_train_to_json(const TransformerTrainConfig& c) {
  ojson j;
  j["epochs"] = c.epochs;
  j["batch"] = c.batch;
  j["lr"] = c.lr;
  j["seed"] = c.seed;
  j["verbose"] = c.verbose;
  return j;
}

TransformerTrainConfig transformer_train_from_json(const ojson& j) {
  TransformerTrainConfig c;
  Reader r(j, "transformer_train");
  r.get("epochs", c.epochs);
  r.get("batch", c.batch);
  r.get("lr", c.lr);
  r.get("seed", c.seed);
  r.get("verbose", c.verbose);
  r.finish();
  return c;
}

ojson sac_to_json(const SacConfig& c) {
  ojson j;
  j["actor_hidden"] = c.actor_hidden;
  j["critic_hidden"] = c.critic_hidden;
  j["lr_start"] = c.lr_start;
  j["batch"] = c.batch;
  j["tau"] = c.tau;
  j["gamma"] = c.gamma;
  j["alpha_ent"] = c.alpha_ent;
  j["buffer_capacity"] = c.buffer_capacity;
  j["total_steps"] = c.total_steps;
  j["eval_interval"] = c.eval_interval;
  j["eval_episodes"] = c.eval_episodes;
  j["warmup_steps"] = c.warmup_steps;
  j["log_std_min"] = c.log_std_min;
  j["log_std_max"] = c.log_std_max;
  j["obs_scale"] = c.obs_scale;
  j["verbose"] = c.verbose;
  return j;
}

SacConfig sac_from_json(const ojson& j) {
  SacConfig c;
  Reader r(j, "sac");
  r.get("actor_hidden", c.actor_hidden);
  r.get("critic_hidden", c.critic_hidden);
  r.get("lr_start", c.lr_start);
  r.get("batch", c.batch);
  r.get("tau", c.tau);
  r.get("gamma", c.gamma);
  r.get("alpha_ent", c.alpha_ent);
  r.get("buffer_capacity", c.buffer_capacity);
  r.get("total_steps", c.total_steps);
  r.get("eval_interval", c.eval_interval);
  r.get("eval_episodes", c.eval_episodes);
  r.get("warmup_steps", c.warmup_steps);
  r.get("log_std_min", c.log_std_min);
  r.get("log_std_max", c.log_std_max);
  r.get("obs_scale", c.obs_scale);
  r.get("verbose", c.verbose);
  r.finish();
  return c;
}

ojson run_config_to_json(const RunConfig& c) {
  ojson j;
  j["env"] = env_to_json(c.env);
  j["optimizer"] = optimizer_to_json(c.optimizer);
  j["transformer"] = transformer_to_json(c.transformer);
  j["transformer_train"] = transformer_train_to_json(c.transformer_train);
  j["sac"] = sac_to_json(c.sac);
  return j;
}

RunConfig run_config_from_json(const ojson& j) {
  RunConfig c;
  Reader r(j, "config");
  r.sub("env", [&](const ojson& v) { c.env = env_from_json(v); });
  r.sub("optimizer", [&](const ojson& v) { c.optimizer = optimizer_from_json(v); });
  r.sub("transformer", [&](const ojson& v) { c.transformer = transformer_from_json(v); });
  r.sub("transformer_train", [&](const ojson& v) { c.transformer_train = transformer_train_from_json(v); });
  r.sub("sac", [&](const ojson& v) { c.sac = sac_from_json(v); });
  r.finish();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  ojson j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config file " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

void apply_override(ojson& j, const std::string& key_eq_value) {
  const auto eq = key_eq_value.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override must look like section.key=value: " + key_eq_value);
  }
  const std::string path = key_eq_value.substr(0, eq);
  const std::string raw = key_eq_value.substr(eq + 1);

  ojson value = ojson::parse(raw, /*cb=*/nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;  // unquoted strings pass through

  ojson* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw std::invalid_argument("bad override path: " + path);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace evtol
