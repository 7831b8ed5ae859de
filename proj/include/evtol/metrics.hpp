#pragma once
// Run bookkeeping: the energy-accuracy metric, exact decimal formatting,
// content hashing, CSV export of episode logs, and the end-of-run manifest.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evtol/env.hpp"

namespace evtol {

// Relative accuracy of a generated energy against a reference:
// 1 - |E_gen - E_ref| / E_ref.  Requires E_ref > 0.
double accuracy(double e_generated_Wh, double e_reference_Wh);

// Decimal form with 17 significant digits: round-trips any finite double.
std::string format_g17(double v);

// SHA-256, lowercase hex.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

std::string read_file(const std::string& path);
// Write via temp file + rename so readers never observe partial content.
void write_file_atomic(const std::string& path, const std::string& bytes);

// Episode log as CSV.  Guided logs append the proposal and z-score columns;
// z_log, when given, must align with rows.
std::string episode_csv(const std::vector<EpisodeRow>& rows, bool guided,
                        const std::vector<std::array<double, 2>>* z_log = nullptr);

// End-of-run record tying together command, configuration, inputs, and
// hashed artifacts; written atomically.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;  // effective configuration (file + overrides)
  std::vector<std::pair<std::string, std::string>> inputs;     // path, sha256
  std::vector<std::pair<std::string, std::string>> artifacts;  // path, sha256
  double wall_seconds = 0.0;

  void add_artifact(const std::string& path);  // hashes the file content
  void add_input(const std::string& path);
  nlohmann::ordered_json to_json() const;
  void write(const std::string& path) const;
};

}  // namespace evtol
