// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rfsim/commands.hpp"

using namespace rfsim;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the rfsim binary through the shell; stderr is discarded unless redirected in `args`.
Result run_cli(const std::string& args, const std::string& env = "") {
  const char* bin = std::getenv("RFSIM_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "RFSIM_BIN must point at the rfsim executable");
  const std::string cmd = env + " '" + std::string(bin) + "' " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  Result r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct Workdir {
  fs::path path;
  explicit Workdir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  std::string file(const std::string& leaf, const std::string& text) const {
    const auto p = (path / leaf).string();
    std::ofstream(p) << text;
    return p;
  }
};

const char* kTwoPlateConfig = R"({
  "scene": {"builtin": "two-plate"},
  "tx_array": {"position": [10, 0, 10]},
  "paths": {"scatter_tessellation_edge": 10.0},
  "trajectories": {"box_origin": [0, -10, 1], "box_dims": [60, 20, 10]},
  "threads": 1
})";

}  // namespace

TEST_CASE("config text round trip") {
  for (const auto& name : preset_names()) {
    const RunConfig c = preset_config(name);
    CHECK(parse_run_config(serialize_run_config(c)) == c);
  }
  RunConfig c = great_msd_default();
  c.seed = 9;
  c.trajectories.trajectory_count = 7;
  c.trajectories.train_count = 3;
  c.tx_array.position = {1, 2, 3};
  CHECK(parse_run_config(serialize_run_config(c)) == c);
}

TEST_CASE("config strictness") {
  try {
    parse_run_config(R"({"paths": {"max_depth": 3}})");
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("paths.max_depth") != std::string::npos);
  }
  try {
    parse_run_config("{\n  \"seed\": 1,\n  oops\n}");
    FAIL("syntax error accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config(R"({"paths": {"seed": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"paths": {"frequency_hz": 1e9}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"preset": "nope"})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"trajectories": {"train_count": 100}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"tx_array": {"rows": 0}})"), ConfigError);
}

TEST_CASE("reference preset") {
  const RunConfig c = great_msd_default();
  CHECK(c.tx_array.element_count() == 64);
  CHECK(c.tx_array.position == Vec3(57.70, 0.01, 25.70));
  CHECK(c.rx_array.element_count() == 1);
  CHECK(c.ofdm.subcarrier_count == 64);
  CHECK(c.ofdm.subcarrier_spacing == 240e3);
  CHECK(c.ofdm.carrier_frequency == 3.5e9);
  CHECK(c.trajectories.trajectory_count == 100);
  CHECK(c.trajectories.samples_per_trajectory == 1000);
  CHECK(c.trajectories.box_dims == Vec3(170, 16, 30));
  CHECK(c.paths.max_reflection_depth == 3);
  CHECK(c.resolved_paths().frequency_hz == c.ofdm.carrier_frequency);
  CHECK(c.resolved_paths().seed != c.resolved_trajectories().seed);
}

TEST_CASE("id lists") {
  CHECK(parse_id_list("0-3,7") == std::vector<int>{0, 1, 2, 3, 7});
  CHECK(parse_id_list("5") == std::vector<int>{5});
  CHECK_THROWS(parse_id_list("3-1"));
  CHECK_THROWS(parse_id_list("1,,2"));
  CHECK_THROWS(parse_id_list("x"));
}

TEST_CASE("exit codes") {
  Workdir w("rfsim_test_cli_codes");
  CHECK(run_cli("").code == kExitUsage);
  CHECK(run_cli("frobnicate").code == kExitUsage);
  CHECK(run_cli("trace").code == kExitUsage);
  CHECK(run_cli("--help").code == kExitOk);
  CHECK(run_cli("config").code == kExitOk);
  const auto bad = w.file("bad.json", R"({"no_such_key": 1})");
  CHECK(run_cli("--config " + bad + " config").code == kExitConfig);
  CHECK(run_cli("config", "RFSIM_CONFIG=" + bad).code == kExitConfig);
  CHECK(run_cli("--config /nonexistent/x.json config").code == kExitConfig);
  CHECK(run_cli("locate --manifest /nonexistent/manifest.json").code == kExitRuntime);
  CHECK(run_cli("trace --rx 57.7 0.01 25.7").code == kExitRuntime);  // coincides with the transmitter
}

TEST_CASE("environment overrides") {
  const auto r = run_cli("config", "RFSIM_SEED=77 RFSIM_THREADS=2");
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["seed"] == 77);
  CHECK(j["threads"] == 2);
  CHECK(nlohmann::json::parse(run_cli("--seed 5 config", "RFSIM_SEED=77").out)["seed"] == 5);
}

TEST_CASE("trace output") {
  Workdir w("rfsim_test_cli_trace");
  const auto cfg = w.file("two.json", kTwoPlateConfig);
  const auto r = run_cli("--config " + cfg + " --json trace --rx 50 5 3");
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["schema"] == kTraceSchema);
  CHECK(j["path_count"].get<std::size_t>() == j["paths"].size());
  CHECK(j["paths"][0]["kind"] == "LOS");
  for (const auto& p : j["paths"]) {
    CHECK(p.contains("delay_s"));
    CHECK(p.contains("gain_db"));
    CHECK(p["transfer"].size() == 4);
  }

  const auto text = run_cli("--config " + cfg + " trace --rx 50 5 3");
  REQUIRE(text.code == 0);
  CHECK(text.out.find(" LOS ") != std::string::npos);
  CHECK(text.out.find(" R ") != std::string::npos);
  CHECK(text.out.find("path(s)") != std::string::npos);
}

TEST_CASE("validate") {
  const auto ok = run_cli("--json validate");
  CHECK(ok.code == kExitOk);
  const auto j = nlohmann::json::parse(ok.out);
  CHECK(j["schema"] == kValidateSchema);
  CHECK(j["pass"] == true);
  CHECK(j["oracles"].size() == 9);

  const auto bad = run_cli("validate --inject-fresnel-fault");
  CHECK(bad.code == kExitValidation);
  CHECK(bad.out.find("FAIL brewster") != std::string::npos);
  CHECK(bad.out.find("PASS friis") != std::string::npos);
}

TEST_CASE("dataset, adp and locate end to end") {
  Workdir w("rfsim_test_cli_e2e");
  const auto cfg = w.file("two.json", kTwoPlateConfig);
  const std::string out = (w.path / "ds").string();
  const auto gen = run_cli("--config " + cfg + " --output " + out + " --json dataset --trajectories 3 --samples 4");
  REQUIRE(gen.code == 0);
  const auto g = nlohmann::json::parse(gen.out);
  CHECK(g["frame_count"] == 12);
  const std::string manifest = out + "/manifest.json";
  const auto ds = load_dataset(manifest);
  CHECK(ds.manifest().train == std::vector<int>{0, 1});
  CHECK(ds.manifest().test == std::vector<int>{2});

  const std::string prefix = (w.path / "img" / "f").string();
  const auto adp = run_cli("--output " + prefix + " adp --manifest " + manifest + " --trajectory 1 --frame 2");
  REQUIRE(adp.code == 0);
  for (const char* leaf : {"_pol0.pgm", "_pol1.pgm", "_combined.pgm", ".adp"}) CHECK(fs::exists(prefix + leaf));
  CHECK(load_adp_raw(prefix + ".adp").size() == 2);
  CHECK(run_cli("adp --manifest " + manifest + " --trajectory 9").code == kExitRuntime);

  const auto self = run_cli("--json locate --manifest " + manifest + " --train 0-2 --test 0-2 --k 1");
  REQUIRE(self.code == 0);
  const auto e = nlohmann::json::parse(self.out);
  CHECK(e["schema"] == kLocateSchema);
  CHECK(e["errors"]["count"] == 12);
  CHECK(e["errors"]["mean_m"].get<double>() == 0.0);
  CHECK(e["errors"]["max_m"].get<double>() == 0.0);

  const auto split = run_cli("--json locate --manifest " + manifest);
  REQUIRE(split.code == 0);
  CHECK(nlohmann::json::parse(split.out)["errors"]["count"] == 4);
}

TEST_CASE("scene export") {
  Workdir w("rfsim_test_cli_scene");
  const auto r = run_cli("--output " + w.path.string() + " scene two-plate");
  REQUIRE(r.code == 0);
  const auto obj = (w.path / "two-plate.obj").string();
  const auto bind = (w.path / "two-plate.bindings.json").string();
  const Scene s = load_scene(obj, bind, builtin_materials());
  CHECK(s.triangles().size() == 4);
  CHECK(s.content_hash() == builtin_scene("two-plate", builtin_materials()).content_hash());
  CHECK(run_cli("scene nowhere").code == kExitUsage);
}
