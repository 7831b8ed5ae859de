#pragma once
// Reference-trajectory dataset: optimized control schedules sampled at the
// control interval, normalized to the action bounds, split train/val/test,
// and stored as JSON lines.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "evtol/optimizer.hpp"

namespace evtol {

struct DatasetEntry {
  int condition_id = 0;
  FlightCondition condition;
  double T_takeoff = 0.0;   // s
  double energy_Wh = 0.0;
  bool feasible = true;
  std::string split;        // "train" | "val" | "test"
  std::vector<std::array<double, 2>> controls01;  // (power, tilt) in [0,1] per step
};

// Sample a schedule at the control interval: the exact sequence the rollout
// executes, normalized by the action bounds.
std::vector<std::array<double, 2>> schedule_controls(const RefDesign& d,
                                                     const OptimizerConfig& ocfg,
                                                     const EnvConfig& env_cfg);

struct DatasetBuildReport {
  int requested = 0;
  int feasible = 0;
  std::vector<int> infeasible_ids;
};

// Optimize every sampled condition; infeasible results are excluded (and
// reported).  Split fractions 0.75/0.15 by floor, remainder is test.
std::vector<DatasetEntry> build_dataset(int n_conditions, std::uint64_t seed,
                                        const OptimizerConfig& ocfg, const EnvConfig& env_cfg,
                                        DatasetBuildReport* report = nullptr);

void assign_splits(std::vector<DatasetEntry>& entries, std::uint64_t seed);

void write_jsonl(const std::vector<DatasetEntry>& entries, const std::string& path);
std::vector<DatasetEntry> read_jsonl(const std::string& path);

}  // namespace evtol
