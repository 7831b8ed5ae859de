#include "evtol/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "evtol/parallel.hpp"
#include "evtol/rng.hpp"

namespace evtol {

using ojson = nlohmann::ordered_json;

std::vector<std::array<double, 2>> schedule_controls(const RefDesign& d,
                                                     const OptimizerConfig& ocfg,
                                                     const EnvConfig& env_cfg) {
  const double T = ocfg.duration_of(std::clamp(d.T01, 1e-6, 1.0));
  const BSpline ps(d.p01, T);
  const BSpline ths(d.th01, T);
  const int n_steps = static_cast<int>(std::ceil(T / env_cfg.dt - 1e-9));
  std::vector<std::array<double, 2>> out(n_steps);
  for (int k = 0; k < n_steps; ++k) {
    const double t = std::min(k * env_cfg.dt, T);
    out[k] = {std::clamp(ps.eval(t), 0.0, 1.0), std::clamp(ths.eval(t), 0.0, 1.0)};
  }
  return out;
}

std::vector<DatasetEntry> build_dataset(int n_conditions, std::uint64_t seed,
                                        const OptimizerConfig& ocfg, const EnvConfig& env_cfg,
                                        DatasetBuildReport* report) {
  const auto conditions = lhs_conditions(n_conditions, seed);
  std::vector<ReferenceResult> results(n_conditions);
  parallel_for(n_conditions, [&](int i) {
    results[i] = optimize_reference(conditions[i], ocfg, env_cfg, seed + 1000003ULL * (i + 1));
  });

  DatasetBuildReport rep;
  rep.requested = n_conditions;
  std::vector<DatasetEntry> entries;
  for (int i = 0; i < n_conditions; ++i) {
    if (!results[i].feasible) {
      rep.infeasible_ids.push_back(i);
      continue;
    }
    DatasetEntry e;
    e.condition_id = i;
    e.condition = conditions[i];
    e.T_takeoff = results[i].duration;
    e.energy_Wh = results[i].rollout.energy_Wh;
    e.feasible = true;
    e.controls01 = schedule_controls(results[i].design, ocfg, apply_condition(env_cfg, conditions[i]));
    entries.push_back(std::move(e));
  }
  rep.feasible = static_cast<int>(entries.size());
  assign_splits(entries, seed);
  if (report != nullptr) *report = rep;
  return entries;
}

void assign_splits(std::vector<DatasetEntry>& entries, std::uint64_t seed) {
  const int n = static_cast<int>(entries.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed ^ 0x5eedf00dULL);
  rng.shuffle(idx);
  const int n_train = static_cast<int>(std::floor(0.75 * n));
  const int n_val = static_cast<int>(std::floor(0.15 * n));
  for (int r = 0; r < n; ++r) {
    entries[idx[r]].split = r < n_train ? "train" : (r < n_train + n_val ? "val" : "test");
  }
}

void write_jsonl(const std::vector<DatasetEntry>& entries, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_jsonl: cannot open " + path);
  for (const auto& e : entries) {
    ojson j;
    j["v"] = 1;
    j["condition_id"] = e.condition_id;
    j["condition"] = {{"alpha_max_deg", e.condition.alpha_max_deg},
                      {"a_max_g", e.condition.a_max_g},
                      {"k_w", e.condition.k_w},
                      {"eta", e.condition.eta},
                      {"S_ref", e.condition.S_ref}};
    j["T_takeoff"] = e.T_takeoff;
    j["energy_Wh"] = e.energy_Wh;
    j["feasible"] = e.feasible;
    j["split"] = e.split;
    ojson ctrl = ojson::array();
    for (const auto& c : e.controls01) ctrl.push_back({c[0], c[1]});
    j["controls"] = std::move(ctrl);
    f << j.dump() << "\n";
  }
  if (!f) throw std::runtime_error("write_jsonl: write failed for " + path);
}

std::vector<DatasetEntry> read_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_jsonl: cannot open " + path);
  std::vector<DatasetEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    ojson j = ojson::parse(line, nullptr, true);
    if (!j.contains("v") || j["v"].get<int>() != 1)
      throw std::runtime_error("read_jsonl: unsupported record version at line " +
                               std::to_string(lineno));
    DatasetEntry e;
    e.condition_id = j.at("condition_id").get<int>();
    const auto& c = j.at("condition");
    e.condition.alpha_max_deg = c.at("alpha_max_deg").get<double>();
    e.condition.a_max_g = c.at("a_max_g").get<double>();
    e.condition.k_w = c.at("k_w").get<double>();
    e.condition.eta = c.at("eta").get<double>();
    e.condition.S_ref = c.at("S_ref").get<double>();
    e.T_takeoff = j.at("T_takeoff").get<double>();
    e.energy_Wh = j.at("energy_Wh").get<double>();
    e.feasible = j.at("feasible").get<bool>();
    e.split = j.at("split").get<std::string>();
    for (const auto& pair : j.at("controls"))
      e.controls01.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace evtol
