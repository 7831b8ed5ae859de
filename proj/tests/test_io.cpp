#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "evtol/checkpoint.hpp"
#include "evtol/config_io.hpp"
#include "evtol/dataset.hpp"
#include "evtol/metrics.hpp"
#include "evtol/svg_plot.hpp"

using namespace evtol;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

TEST_CASE("sha256 known vectors and file hashing") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // 56 bytes: exercises the two-block padding path
  CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  CHECK(sha256_hex(std::string(1000000, 'a')) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
  // exactly one block of payload (64 bytes) forces length into a second block
  CHECK(sha256_hex(std::string(64, 'x')) == sha256_hex(std::string(32, 'x') + std::string(32, 'x')));

  TempFile f("tmp_io_hash.bin");
  const std::string payload("\x00\x01\xff binary\n payload", 19);
  write_file_atomic(f.path, payload);
  CHECK(read_file(f.path) == payload);
  CHECK(sha256_file(f.path) == sha256_hex(payload));
  CHECK_THROWS_AS((void)sha256_file("does_not_exist_xyz.bin"), std::runtime_error);
}

TEST_CASE("energy accuracy metric") {
  CHECK(accuracy(1693.0, 1693.0) == 1.0);
  CHECK(accuracy(1740.0, 1693.0) == 1.0 - 47.0 / 1693.0);
  CHECK(accuracy(1740.0, 1693.0) == doctest::Approx(0.972).epsilon(0.001));
  // symmetric in the deviation
  CHECK(accuracy(1646.0, 1693.0) == accuracy(1740.0, 1693.0));
  // can go negative for wild misses
  CHECK(accuracy(4000.0, 1693.0) < 0.0);
  CHECK_THROWS_AS((void)accuracy(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)accuracy(1.0, -5.0), std::invalid_argument);
}

TEST_CASE("17-significant-digit formatting round-trips doubles") {
  const double vals[] = {0.0,
                         -0.0,
                         1.0 / 3.0,
                         0.1,
                         3.141592653589793,
                         2.2250738585072014e-308,
                         1.7976931348623157e308,
                         5e-324,
                         -123456789.12345679,
                         6.62607015e-34,
                         21.13888888888889};
  for (double v : vals) {
    const std::string s = format_g17(v);
    const double back = std::strtod(s.c_str(), nullptr);
    CHECK(same_bits(back, v));
  }
  CHECK(format_g17(1.0) == "1");
}

TEST_CASE("checkpoint: save -> load -> save is byte-identical") {
  ParamStore store;
  Rng rng(20260816);
  store.add("enc.w", Tensor::randn(3, 4, rng));
  store.add("enc.b", Tensor::from(1, 4, {0.0, -0.0, 5e-324, 1.7976931348623157e308}));
  store.add("head.w", Tensor::randn(2, 2, rng, 0.01));

  nlohmann::ordered_json cfg;
  cfg["d_model"] = 64;
  cfg["dropout"] = 0.1;
  Checkpoint ckpt = make_checkpoint("transformer", 42, cfg, {&store});
  CHECK(ckpt.params.size() == 3);

  TempFile f1("tmp_io_ckpt1.bin"), f2("tmp_io_ckpt2.bin");
  save_checkpoint(f1.path, ckpt);
  Checkpoint loaded = load_checkpoint(f1.path);
  CHECK(loaded.kind == "transformer");
  CHECK(loaded.seed == 42);
  CHECK(loaded.config.dump() == cfg.dump());
  REQUIRE(loaded.params.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(loaded.params[i].name == ckpt.params[i].name);
    REQUIRE(loaded.params[i].value.rows() == ckpt.params[i].value.rows());
    REQUIRE(loaded.params[i].value.cols() == ckpt.params[i].value.cols());
    for (std::size_t k = 0; k < ckpt.params[i].value.size(); ++k)
      CHECK(same_bits(loaded.params[i].value[k], ckpt.params[i].value[k]));
  }

  save_checkpoint(f2.path, loaded);
  CHECK(sha256_file(f1.path) == sha256_file(f2.path));

  // restore into a fresh store (values start at zero)
  ParamStore fresh;
  fresh.add("enc.w", Tensor::zeros(3, 4));
  fresh.add("enc.b", Tensor::zeros(1, 4));
  fresh.add("head.w", Tensor::zeros(2, 2));
  restore_params(loaded, fresh);
  for (std::size_t k = 0; k < store[0].value.size(); ++k)
    CHECK(same_bits(fresh[0].value[k], store[0].value[k]));

  ParamStore wrong_shape;
  wrong_shape.add("enc.w", Tensor::zeros(4, 3));
  CHECK_THROWS_AS(restore_params(loaded, wrong_shape), std::runtime_error);
  ParamStore missing;
  missing.add("enc.w", Tensor::zeros(3, 4));
  missing.add("nonexistent", Tensor::zeros(1, 1));
  CHECK_THROWS_AS(restore_params(loaded, missing), std::runtime_error);
}

TEST_CASE("checkpoint: corrupt and truncated files are rejected") {
  ParamStore store;
  store.add("w", Tensor::from(2, 2, {1.0, 2.0, 3.0, 4.0}));
  Checkpoint ckpt = make_checkpoint("sac", 7, nlohmann::ordered_json::object(), {&store});
  TempFile good("tmp_io_ckpt_good.bin"), bad("tmp_io_ckpt_bad.bin");
  save_checkpoint(good.path, ckpt);

  std::string bytes = read_file(good.path);
  // magic mismatch
  std::string corrupt = bytes;
  corrupt[0] ^= 0x40;
  write_file_atomic(bad.path, corrupt);
  CHECK_THROWS_AS((void)load_checkpoint(bad.path), std::runtime_error);
  // payload truncated mid-parameter
  write_file_atomic(bad.path, bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS((void)load_checkpoint(bad.path), std::runtime_error);
  // trailing garbage
  write_file_atomic(bad.path, bytes + "xx");
  CHECK_THROWS_AS((void)load_checkpoint(bad.path), std::runtime_error);
  // duplicate parameter names rejected up front
  ParamStore dup;
  dup.add("w", Tensor::zeros(1, 1));
  CHECK_THROWS_AS((void)make_checkpoint("sac", 0, nlohmann::ordered_json::object(), {&store, &dup}),
                  std::invalid_argument);
}

TEST_CASE("config: defaults round-trip through JSON exactly") {
  RunConfig def;
  const ojson j1 = run_config_to_json(def);
  RunConfig back = run_config_from_json(j1);
  const ojson j2 = run_config_to_json(back);
  CHECK(j1.dump() == j2.dump());
  // spot defaults
  CHECK(back.env.dt == 0.1);
  CHECK(back.env.vehicle.mass_kg == 725.0);
  CHECK(back.optimizer.max_rollouts == 20000);
  CHECK(back.transformer.d_head == 64);
  CHECK(back.sac.lr_start == 4e-4);
}

TEST_CASE("config: partial files keep defaults, unknown fields rejected") {
  ojson j = ojson::parse(R"({"sac": {"batch": 16}, "env": {"dt": 0.05, "vehicle": {"kappa": 1.3}, "obs_mode": "vanilla"}})");
  RunConfig c = run_config_from_json(j);
  CHECK(c.sac.batch == 16);
  CHECK(c.sac.lr_start == 4e-4);      // untouched default
  CHECK(c.env.dt == 0.05);
  CHECK(c.env.vehicle.kappa == 1.3);
  CHECK(c.env.vehicle.mass_kg == 725.0);
  CHECK(c.env.obs_mode == ObsMode::kVanilla);
  CHECK(c.env.t_max == 40.0);

  CHECK_THROWS_AS((void)run_config_from_json(ojson::parse(R"({"bogus": {}})")), std::invalid_argument);
  CHECK_THROWS_AS((void)run_config_from_json(ojson::parse(R"({"env": {"dtt": 0.1}})")), std::invalid_argument);
  CHECK_THROWS_AS((void)run_config_from_json(ojson::parse(R"({"env": {"vehicle": {"masskg": 1}}})")), std::invalid_argument);
  CHECK_THROWS_AS((void)run_config_from_json(ojson::parse(R"({"sac": {"alpha": 0.2}})")), std::invalid_argument);
  CHECK_THROWS_AS((void)run_config_from_json(ojson::parse(R"({"env": {"obs_mode": "hybrid"}})")), std::invalid_argument);
  CHECK_THROWS_AS((void)run_config_from_json(ojson::parse(R"([1,2,3])")), std::invalid_argument);
  // type errors surface with context
  CHECK_THROWS_AS((void)run_config_from_json(ojson::parse(R"({"env": {"dt": "fast"}})")), std::invalid_argument);
}

TEST_CASE("config: file loading and dotted overrides (flags win)") {
  TempFile f("tmp_io_config.json");
  write_file_atomic(f.path, R"({"env": {"dt": 0.2}, "transformer": {"blocks": 1}})");
  // overrides layered onto the file's JSON before parsing
  ojson j = ojson::parse(read_file(f.path));
  apply_override(j, "env.dt=0.05");
  apply_override(j, "env.vehicle.eta=0.8");
  apply_override(j, "sac.verbose=true");
  apply_override(j, "transformer_train.seed=99");
  RunConfig c = run_config_from_json(j);
  CHECK(c.env.dt == 0.05);  // flag beat the file
  CHECK(c.env.vehicle.eta == 0.8);
  CHECK(c.sac.verbose == true);
  CHECK(c.transformer_train.seed == 99);
  CHECK(c.transformer.blocks == 1);  // file value preserved

  // unquoted strings pass through; malformed overrides throw
  ojson k;
  apply_override(k, "env.obs_mode=guided");
  CHECK(k["env"]["obs_mode"] == "guided");
  CHECK_THROWS_AS(apply_override(k, "no_equals_sign"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(k, "=5"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(k, "env..dt=1"), std::invalid_argument);

  CHECK_THROWS_AS((void)load_run_config("no_such_config.json"), std::runtime_error);
  TempFile g("tmp_io_config_bad.json");
  write_file_atomic(g.path, "{not json");
  CHECK_THROWS_AS((void)load_run_config(g.path), std::invalid_argument);
  RunConfig from_file = load_run_config(f.path);
  CHECK(from_file.env.dt == 0.2);
}

TEST_CASE("dataset JSONL round-trip preserves every field") {
  std::vector<DatasetEntry> entries(3);
  entries[0].condition_id = 0;
  entries[0].condition = FlightCondition{12.5, 0.31, 0.77, 0.8123456789012345, 0.95};
  entries[0].T_takeoff = 21.13888888888889;
  entries[0].energy_Wh = 1693.4567890123456;
  entries[0].feasible = true;
  entries[0].split = "train";
  entries[0].controls01 = {{0.1, 0.9}, {0.5000000000000001, 0.25}, {1.0, 0.0}};
  entries[1].condition_id = 7;
  entries[1].condition = FlightCondition{15.0, 0.4, 1.0, 0.9, 1.0};
  entries[1].T_takeoff = 25.0;
  entries[1].energy_Wh = 1800.0;
  entries[1].feasible = false;
  entries[1].split = "val";
  entries[1].controls01 = {{0.3333333333333333, 0.6666666666666666}};
  entries[2].condition_id = 63;
  entries[2].split = "test";

  TempFile f("tmp_io_dataset.jsonl");
  write_jsonl(entries, f.path);
  const std::string text = read_file(f.path);
  int lines = 0;
  for (char ch : text)
    if (ch == '\n') ++lines;
  CHECK(lines == 3);

  std::vector<DatasetEntry> back = read_jsonl(f.path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].condition_id == entries[i].condition_id);
    CHECK(same_bits(back[i].condition.alpha_max_deg, entries[i].condition.alpha_max_deg));
    CHECK(same_bits(back[i].condition.a_max_g, entries[i].condition.a_max_g));
    CHECK(same_bits(back[i].condition.k_w, entries[i].condition.k_w));
    CHECK(same_bits(back[i].condition.eta, entries[i].condition.eta));
    CHECK(same_bits(back[i].condition.S_ref, entries[i].condition.S_ref));
    CHECK(same_bits(back[i].T_takeoff, entries[i].T_takeoff));
    CHECK(same_bits(back[i].energy_Wh, entries[i].energy_Wh));
    CHECK(back[i].feasible == entries[i].feasible);
    CHECK(back[i].split == entries[i].split);
    REQUIRE(back[i].controls01.size() == entries[i].controls01.size());
    for (std::size_t s = 0; s < entries[i].controls01.size(); ++s) {
      CHECK(same_bits(back[i].controls01[s][0], entries[i].controls01[s][0]));
      CHECK(same_bits(back[i].controls01[s][1], entries[i].controls01[s][1]));
    }
  }
  CHECK_THROWS_AS((void)read_jsonl("no_such_dataset.jsonl"), std::runtime_error);
}

TEST_CASE("episode CSV layout") {
  std::vector<EpisodeRow> rows(2);
  rows[0] = EpisodeRow{0.1, 0.01, 0.12, 0.3, 0.2, 2.5e5, 0.7853981633974483,
                       -0.05, -0.02, -0.02, -0.01, 6.944444444444445};
  rows[1] = EpisodeRow{0.2, 0.05, 0.2, 0.9, 0.4, 3.11e5, 0.9, -0.04, -0.02, -0.01, -0.01, 15.0};
  rows[1].proposal = {0.5, 0.25, 0.01, 0.04};

  const std::string vanilla = episode_csv(rows, false);
  CHECK(vanilla.substr(0, vanilla.find('\n')) ==
        "t,x,y,vx,vy,power_W,theta_rad,reward,r_y,r_vx,r_p,energy_Wh");
  CHECK(vanilla.find("250000") != std::string::npos);
  CHECK(vanilla.find("0.78539816339744828") != std::string::npos);  // 17-digit tilt
  int lines = 0;
  for (char ch : vanilla)
    if (ch == '\n') ++lines;
  CHECK(lines == 3);  // header + 2 rows

  const std::string guided = episode_csv(rows, true);
  CHECK(guided.substr(0, guided.find('\n')) ==
        "t,x,y,vx,vy,power_W,theta_rad,reward,r_y,r_vx,r_p,energy_Wh,mu_P,mu_theta,var_P,var_theta");

  std::vector<std::array<double, 2>> z = {{0.3, -0.6}, {1.2, 0.0}};
  const std::string with_z = episode_csv(rows, true, &z);
  CHECK(with_z.substr(0, with_z.find('\n')) ==
        "t,x,y,vx,vy,power_W,theta_rad,reward,r_y,r_vx,r_p,energy_Wh,mu_P,mu_theta,var_P,var_theta,z_P,z_theta");
  CHECK(with_z.find("-0.59999999999999998") != std::string::npos);
  std::vector<std::array<double, 2>> z_short = {{0.3, -0.6}};
  CHECK_THROWS_AS((void)episode_csv(rows, true, &z_short), std::invalid_argument);
}

TEST_CASE("run manifest records inputs and hashed artifacts") {
  TempFile art("tmp_io_artifact.csv"), man("tmp_io_manifest.json");
  write_file_atomic(art.path, "t,x\n0,0\n");

  RunManifest m;
  m.command = "simulate";
  m.seed = 314;
  m.config = ojson::parse(R"({"env": {"dt": 0.1}})");
  m.wall_seconds = 1.25;
  m.add_input(art.path);
  m.add_artifact(art.path);
  m.write(man.path);

  const ojson j = ojson::parse(read_file(man.path));
  CHECK(j["command"] == "simulate");
  CHECK(j["seed"] == 314);
  CHECK(j["config"]["env"]["dt"] == 0.1);
  CHECK(j["wall_seconds"] == 1.25);
  REQUIRE(j["artifacts"].size() == 1);
  CHECK(j["artifacts"][0]["path"] == art.path);
  CHECK(j["artifacts"][0]["sha256"] == sha256_hex("t,x\n0,0\n"));
  REQUIRE(j["inputs"].size() == 1);
  CHECK(j["inputs"][0]["sha256"] == j["artifacts"][0]["sha256"]);
  // key order is stable for reproducible diffs
  auto it = j.begin();
  CHECK(it.key() == "command");
  ++it;
  CHECK(it.key() == "seed");
}

TEST_CASE("svg plots render and validate input") {
  PlotSpec spec;
  spec.title = "Climb & accelerate";
  spec.x_label = "x [m]";
  spec.y_label = "y [m]";
  spec.series.push_back({"reference", {0, 100, 400, 900}, {0, 40, 160, 305}, "#1f77b4"});
  spec.series.push_back({"agent", {0, 120, 500, 950}, {0, 35, 170, 305}, "#d62728"});
  const std::string svg = render_svg_plot(spec);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("Climb &amp; accelerate") != std::string::npos);
  std::size_t polylines = 0, pos = 0;
  while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
    ++polylines;
    pos += 9;
  }
  CHECK(polylines == 2);
  CHECK(svg.find("reference") != std::string::npos);
  CHECK(svg.find("x [m]") != std::string::npos);

  TempFile f("tmp_io_plot.svg");
  write_svg_plot(f.path, spec);
  CHECK(read_file(f.path) == svg);

  PlotSpec empty;
  CHECK_THROWS_AS((void)render_svg_plot(empty), std::invalid_argument);
  PlotSpec mismatch;
  mismatch.series.push_back({"bad", {0, 1}, {0}, "#000"});
  CHECK_THROWS_AS((void)render_svg_plot(mismatch), std::invalid_argument);
  PlotSpec constant;  // degenerate ranges still render
  constant.series.push_back({"flat", {1, 1, 1}, {2, 2, 2}, "#000"});
  CHECK(render_svg_plot(constant).find("<polyline") != std::string::npos);
}
