#pragma once
// JSON (de)serialization of run configuration.  Readers start from the
// compiled-in defaults, overwrite the fields present, and reject unknown
// keys so typos cannot silently fall back to defaults.

#include <string>

#include <nlohmann/json.hpp>

#include "evtol/env.hpp"
#include "evtol/optimizer.hpp"
#include "evtol/sac.hpp"
#include "evtol/transformer.hpp"
#include "evtol/vehicle.hpp"

namespace evtol {

using ojson = nlohmann::ordered_json;

ojson vehicle_to_json(const VehicleConfig& c);
VehicleConfig vehicle_from_json(const ojson& j);

ojson env_to_json(const EnvConfig& c);
EnvConfig env_from_json(const ojson& j);

ojson optimizer_to_json(const OptimizerConfig& c);
OptimizerConfig optimizer_from_json(const ojson& j);

ojson transformer_to_json(const TransformerConfig& c);
TransformerConfig transformer_from_json(const ojson& j);

ojson transformer_train_to_json(const TransformerTrainConfig& c);
TransformerTrainConfig transformer_train_from_json(const ojson& j);

ojson sac_to_json(const SacConfig& c);
SacConfig sac_from_json(const ojson& j);

// Top-level config: every section optional, missing sections = defaults.
struct RunConfig {
  EnvConfig env;
  OptimizerConfig optimizer;
  TransformerConfig transformer;
  TransformerTrainConfig transformer_train;
  SacConfig sac;
};

ojson run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const ojson& j);
RunConfig load_run_config(const std::string& path);

// Apply a dotted-path override like "env.dt=0.05" or "sac.batch=64" onto a
// config JSON tree; the value parses as JSON with a string fallback.
void apply_override(ojson& j, const std::string& key_eq_value);

}  // namespace evtol
