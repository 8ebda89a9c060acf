#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nelson/config.hpp"
#include "nelson/errors.hpp"
#include "nelson/experiments.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nelson;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nelson_config_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json desk_json() {
  std::ifstream in(std::string(NELSON_CONFIG_DIR) + "/desk_skg.json");
  return nlohmann::json::parse(in);
}

ExperimentConfig quick(Experiment e) {
  ExperimentConfig c = load_config(std::string(NELSON_CONFIG_DIR) + "/desk_skg.json");
  c.experiment = e;
  c.t_final = 0.02;
  c.sample_interval = 0.01;
  return c;
}

} // namespace

TEST_CASE("experiment names") {
  for (const auto e : {Experiment::SkgRun, Experiment::FreeCompare, Experiment::SemiclassicalScan,
                       Experiment::FockVerify, Experiment::Theorem2Scaling, Experiment::ConvergenceStudy})
    CHECK(experiment_from_name(experiment_name(e)) == e);
  CHECK_THROWS_AS((void)experiment_from_name("skg_run"), ConfigError);
}

TEST_CASE("config round trip") {
  for (const auto& entry : fs::directory_iterator(NELSON_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    const ExperimentConfig c = load_config(entry.path().string());
    const ExperimentConfig back = config_from_json(nlohmann::json::parse(config_to_json(c).dump()));
    CHECK(back == c);
    CHECK(config_hash(back) == config_hash(c));
  }
  ExperimentConfig c;
  c.k_list = std::vector<LatticeVector>{{1, 0, 0}, {-2, 0, 0}};
  c.initial.alpha = InitialSpec::Alpha::SingleMode;
  c.initial.mode = {2, 0, 0};
  c.initial.value = cplx(0.25, -0.5);
  c.fock.method = "krylov";
  CHECK(config_from_json(nlohmann::json::parse(config_to_json(c).dump())) == c);
}

TEST_CASE("unknown keys and bad values are rejected") {
  auto j = desk_json();
  j["typo"] = 1;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = desk_json();
  j["params"]["lambda"] = 2.0;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = desk_json();
  j["initial"]["alpha"] = {{"single_mode", {{"k", {1}}, {"value", {0.1, 0.0}}, {"phase", 0}}}};
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = desk_json();
  j["experiment"] = "skg";
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = desk_json();
  j["fock"] = {{"method", "lanczos"}};
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = desk_json();
  j["t_final"] = -1.0;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = desk_json();
  j["params"]["N"] = "two";
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = desk_json();
  j["params"]["grid_points"] = 10;
  CHECK_THROWS_AS(params_from_json(j["params"]).validate(), ConfigError);

  const fs::path dir = scratch("parse");
  std::ofstream(dir / "broken.json") << "{ \"experiment\": ";
  CHECK_THROWS_AS(load_config((dir / "broken.json").string()), ConfigError);
  CHECK_THROWS_AS(load_config((dir / "missing.json").string()), ConfigError);
}

TEST_CASE("relative input files resolve against the config directory") {
  const fs::path dir = scratch("relative");
  auto j = desk_json();
  j["initial"]["alpha"] = {{"file", "alpha.txt"}};
  std::ofstream(dir / "cfg.json") << j.dump();
  const ExperimentConfig c = load_config((dir / "cfg.json").string());
  CHECK(fs::path(c.initial.alpha_file) == dir / "alpha.txt");
}

TEST_CASE("hash is stable and sensitive") {
  const ExperimentConfig a = load_config(std::string(NELSON_CONFIG_DIR) + "/desk_fock.json");
  ExperimentConfig b = a;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed += 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("manifest lists every output file") {
  const fs::path dir = scratch("manifest");
  ExperimentConfig c = quick(Experiment::SkgRun);
  c.checkpoint = true;
  run_with_manifest(c, dir.string());
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(m.at("experiment") == "skg-run");
  CHECK(m.at("config_hash") == config_hash(c));
  CHECK(m.at("seed") == c.seed);
  CHECK(m.contains("code_version"));
  CHECK(m.contains("start_time"));
  CHECK(m.contains("end_time"));
  const auto files = m.at("files").get<std::vector<std::string>>();
  CHECK(files.size() == 4);
  for (const auto& f : files) CHECK(fs::exists(dir / f));
  CHECK(!fs::exists(dir / "manifest.json.tmp"));
  // the written config reproduces the run
  CHECK(load_config((dir / "config.json").string()) == c);
}

TEST_CASE("failed runs leave no manifest") {
  const fs::path dir = scratch("failed");
  ExperimentConfig c = quick(Experiment::SkgRun);
  run_with_manifest(c, dir.string());
  REQUIRE(fs::exists(dir / "manifest.json"));
  c.experiment = Experiment::FockVerify;
  c.fock.budget = 100;
  CHECK_THROWS_AS(run_with_manifest(c, dir.string()), BudgetError);
  CHECK(!fs::exists(dir / "manifest.json"));
}

TEST_CASE("empty k list writes header-only scan output") {
  const fs::path dir = scratch("empty_k");
  ExperimentConfig c = quick(Experiment::SemiclassicalScan);
  c.k_list = std::vector<LatticeVector>{};
  run_with_manifest(c, dir.string());
  const std::string scan = slurp(dir / "scan.csv");
  CHECK(std::count(scan.begin(), scan.end(), '\n') == 1);
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("reruns are byte-identical") {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  const ExperimentConfig c = quick(Experiment::FreeCompare);
  const auto files = run_experiment(c, a.string());
  run_experiment(c, b.string());
  for (const auto& f : files) CHECK(slurp(a / f) == slurp(b / f));
}
