#pragma once
// Binary weight container: a fixed magic, a little-endian u64 header length,
// a JSON header (format, version, kind, seed, config, parameter manifest),
// then each parameter's values as raw little-endian 64-bit floats in
// manifest order.  Saving what load() returned reproduces the file
// byte-for-byte.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evtol/params.hpp"
#include "evtol/tensor.hpp"

namespace evtol {

struct Checkpoint {
  std::string kind;  // e.g. "transformer", "sac"
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;  // arbitrary configuration blob
  std::vector<NamedParam> params;  // adam state unused; values in file order
};

// Serialize and write atomically (temp file + rename).
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// Convenience: capture one or more parameter stores (names must be unique).
Checkpoint make_checkpoint(const std::string& kind, std::uint64_t seed,
                           const nlohmann::ordered_json& config,
                           const std::vector<const ParamStore*>& stores);

Checkpoint load_checkpoint(const std::string& path);

// Copy loaded values into a store by name; every store entry must be present
// with a matching shape, else std::runtime_error.
void restore_params(const Checkpoint& ckpt, ParamStore& store);

}  // namespace evtol
