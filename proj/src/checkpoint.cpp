#include "evtol/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace evtol {

namespace {

constexpr char kMagic[8] = {'E', 'V', 'T', 'L', 'W', 'T', 'S', '1'};

static_assert(sizeof(double) == 8, "container format requires 64-bit doubles");

void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void append_f64_le(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  append_u64_le(out, bits);  // per-byte writes are endian-independent
}

double read_f64_le(const unsigned char* p) {
  std::uint64_t bits = read_u64_le(p);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

void atomic_write(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + tmp + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("checkpoint: short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("checkpoint: cannot rename " + tmp + " to " + path);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  header["format"] = "evtol-weights";
  header["version"] = 1;
  header["kind"] = ckpt.kind;
  header["seed"] = ckpt.seed;
  header["config"] = ckpt.config;
  auto& manifest = header["params"] = nlohmann::ordered_json::array();
  for (const NamedParam& p : ckpt.params) {
    manifest.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  const std::string header_bytes = header.dump();

  std::string out;
  out.reserve(16 + header_bytes.size() + 64);
  out.append(kMagic, sizeof(kMagic));
  append_u64_le(out, header_bytes.size());
  out += header_bytes;
  for (const NamedParam& p : ckpt.params)
    for (std::size_t i = 0; i < p.value.size(); ++i) append_f64_le(out, p.value[i]);

  atomic_write(path, out);
}

Checkpoint make_checkpoint(const std::string& kind, std::uint64_t seed,
                           const nlohmann::ordered_json& config,
                           const std::vector<const ParamStore*>& stores) {
  Checkpoint c;
  c.kind = kind;
  c.seed = seed;
  c.config = config;
  for (const ParamStore* s : stores)
    for (int i = 0; i < s->size(); ++i) {
      for (const NamedParam& existing : c.params)
        if (existing.name == (*s)[i].name)
          throw std::invalid_argument("make_checkpoint: duplicate parameter name " +
                                      existing.name);
      c.params.push_back(NamedParam{(*s)[i].name, (*s)[i].value.clone(), AdamState{}});
    }
  return c;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());

  if (bytes.size() < 16 || std::memcmp(p, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: " + path + " is not a weight container");
  const std::uint64_t header_len = read_u64_le(p + 8);
  if (16 + header_len > bytes.size())
    throw std::runtime_error("checkpoint: truncated header in " + path);

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(bytes.substr(16, header_len));
  } catch (const std::exception& e) {
    throw std::runtime_error("checkpoint: bad header in " + path + ": " + e.what());
  }
  if (header.value("format", "") != "evtol-weights" || header.value("version", 0) != 1)
    throw std::runtime_error("checkpoint: unsupported container format in " + path);

  Checkpoint c;
  c.kind = header.value("kind", "");
  c.seed = header.value("seed", std::uint64_t{0});
  c.config = header.value("config", nlohmann::ordered_json::object());

  std::size_t off = 16 + header_len;
  for (const auto& m : header.at("params")) {
    const std::string name = m.at("name").get<std::string>();
    const int rows = m.at("rows").get<int>();
    const int cols = m.at("cols").get<int>();
    if (rows < 0 || cols < 0) throw std::runtime_error("checkpoint: bad shape for " + name);
    Tensor t(rows, cols);
    const std::size_t need = t.size() * 8;
    if (off + need > bytes.size())
      throw std::runtime_error("checkpoint: truncated payload at " + name);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = read_f64_le(p + off + 8 * i);
    off += need;
    c.params.push_back(NamedParam{name, std::move(t), AdamState{}});
  }
  if (off != bytes.size())
    throw std::runtime_error("checkpoint: trailing bytes in " + path);
  return c;
}

void restore_params(const Checkpoint& ckpt, ParamStore& store) {
  for (int i = 0; i < store.size(); ++i) {
    NamedParam& dst = store[i];
    const NamedParam* src = nullptr;
    for (const NamedParam& p : ckpt.params)
      if (p.name == dst.name) {
        src = &p;
        break;
      }
    if (!src) throw std::runtime_error("checkpoint: missing parameter " + dst.name);
    if (!src->value.same_shape(dst.value))
      throw std::runtime_error("checkpoint: shape mismatch for " + dst.name + ": file " +
                               src->value.shape_str() + " vs model " + dst.value.shape_str());
    for (std::size_t k = 0; k < dst.value.size(); ++k) dst.value[k] = src->value[k];
  }
}

}  // namespace evtol
