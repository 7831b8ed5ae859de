#include "evtol/metrics.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace evtol {

double accuracy(double e_generated_Wh, double e_reference_Wh) {
  if (!(e_reference_Wh > 0.0))
    throw std::invalid_argument("accuracy: reference energy must be positive");
  return 1.0 - std::abs(e_generated_Wh - e_reference_Wh) / e_reference_Wh;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ------------------------------------------------------------------ sha256

namespace {

struct Sha256 {
  // FIPS 180-4 constants
  static constexpr std::array<std::uint32_t, 64> kK = {
      0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
      0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
      0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
      0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
      0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
      0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
      0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
      0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
      0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
      0xc67178f2};

  std::array<std::uint32_t, 8> h = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                                    0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
  std::array<unsigned char, 64> block{};
  std::size_t block_len = 0;
  std::uint64_t total_bits = 0;

  static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

  void compress() {
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(block[4 * i]) << 24) | (std::uint32_t(block[4 * i + 1]) << 16) |
             (std::uint32_t(block[4 * i + 2]) << 8) | std::uint32_t(block[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    auto [a, b, c, d, e, f, g, hh] = h;
    for (int i = 0; i < 64; ++i) {
      const std::uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      const std::uint32_t ch = (e & f) ^ (~e & g);
      const std::uint32_t t1 = hh + S1 + ch + kK[i] + w[i];
      const std::uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      const std::uint32_t t2 = S0 + maj;
      hh = g;
      g = f;
      f = e;
      e = d + t1;
      d = c;
      c = b;
      b = a;
      a = t1 + t2;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
    h[5] += f;
    h[6] += g;
    h[7] += hh;
  }

  void update(const unsigned char* data, std::size_t len) {
    total_bits += std::uint64_t(len) * 8;
    while (len > 0) {
      const std::size_t take = std::min(len, block.size() - block_len);
      std::memcpy(block.data() + block_len, data, take);
      block_len += take;
      data += take;
      len -= take;
      if (block_len == block.size()) {
        compress();
        block_len = 0;
      }
    }
  }

  std::string finish() {
    const std::uint64_t bits = total_bits;
    const unsigned char pad = 0x80;
    update(&pad, 1);
    const unsigned char zero = 0x00;
    while (block_len != 56) update(&zero, 1);
    unsigned char len_be[8];
    for (int i = 0; i < 8; ++i) len_be[i] = static_cast<unsigned char>(bits >> (8 * (7 - i)));
    // write the length directly to avoid double-counting it in total_bits
    std::memcpy(block.data() + 56, len_be, 8);
    compress();
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (std::uint32_t word : h)
      for (int i = 3; i >= 0; --i) {
        const unsigned byte = (word >> (8 * i)) & 0xff;
        out.push_back(hex[byte >> 4]);
        out.push_back(hex[byte & 0xf]);
      }
    return out;
  }
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  Sha256 s;
  s.update(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  return s.finish();
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

// -------------------------------------------------------------------- io

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_file: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_file_atomic: cannot open " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write_file_atomic: short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("write_file_atomic: cannot rename onto " + path);
}

// ------------------------------------------------------------------- csv

std::string episode_csv(const std::vector<EpisodeRow>& rows, bool guided,
                        const std::vector<std::array<double, 2>>* z_log) {
  if (z_log && z_log->size() != rows.size())
    throw std::invalid_argument("episode_csv: z column length does not match rows");
  std::string out = "t,x,y,vx,vy,power_W,theta_rad,reward,r_y,r_vx,r_p,energy_Wh";
  if (guided) {
    out += ",mu_P,mu_theta,var_P,var_theta";
    if (z_log) out += ",z_P,z_theta";
  }
  out += "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const EpisodeRow& r = rows[i];
    const double* vals[] = {&r.t,      &r.x,   &r.y,    &r.vx,  &r.vy, &r.power,
                            &r.theta,  &r.reward, &r.r_y, &r.r_vx, &r.r_p, &r.energy_Wh};
    for (std::size_t j = 0; j < std::size(vals); ++j) {
      if (j) out += ',';
      out += format_g17(*vals[j]);
    }
    if (guided) {
      for (double p : r.proposal) {
        out += ',';
        out += format_g17(p);
      }
      if (z_log) {
        out += ',';
        out += format_g17((*z_log)[i][0]);
        out += ',';
        out += format_g17((*z_log)[i][1]);
      }
    }
    out += '\n';
  }
  return out;
}

// --------------------------------------------------------------- manifest

void RunManifest::add_artifact(const std::string& path) {
  artifacts.emplace_back(path, sha256_file(path));
}

void RunManifest::add_input(const std::string& path) {
  inputs.emplace_back(path, sha256_file(path));
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config;
  auto files = [](const std::vector<std::pair<std::string, std::string>>& v) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& [path, hash] : v) arr.push_back({{"path", path}, {"sha256", hash}});
    return arr;
  };
  j["inputs"] = files(inputs);
  j["artifacts"] = files(artifacts);
  j["wall_seconds"] = wall_seconds;
  return j;
}

void RunManifest::write(const std::string& path) const {
  write_file_atomic(path, to_json().dump(2) + "\n");
}

}  // namespace evtol
