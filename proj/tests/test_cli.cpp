#include <algorithm>
#include <cstdlib>
#include <functional>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "kmpc/config.hpp"
#include "kmpc/mpc.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "kmpc_test_cli";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& args, const std::string& tag = "last") {
  const std::string cmd = std::string(KMPC_CLI_PATH) + " " + args + " >" + (kWork / (tag + ".out")).string() +
                          " 2>" + (kWork / (tag + ".err")).string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const std::string& name, const std::function<void(json&)>& edit = {}) {
  json j = {{"seed", 7},
            {"plant_config", (fs::path(KMPC_SOURCE_DIR) / "configs" / "default_plant.json").string()},
            {"dataset", {{"n_loads", 4}}},
            {"kdnn", {{"lifted_dim", 8}, {"hidden", 4}, {"batch_size", 16}, {"max_epochs", 3}, {"patience", 0}}},
            {"eval", {{"cases", 3}}}};
  if (edit) edit(j);
  const fs::path p = kWork / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("pipeline end to end") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  const fs::path cfg = write_config("cfg.json");
  const std::string c = " --config " + cfg.string();
  const fs::path w = kWork;

  REQUIRE(run("gen-data" + c + " --out " + (w / "data").string()) == 0);
  const json meta = json::parse(slurp(w / "data" / "dataset.json"));
  CHECK(meta["n_samples"] == 4 * 3 * 5);
  CHECK(lines(slurp(w / "data" / "samples.csv")) == 4 * 3 * 5 + 1);
  CHECK(meta.contains("scaler"));

  REQUIRE(run("gen-data" + c + " --out " + (w / "data2").string()) == 0);
  CHECK(slurp(w / "data" / "samples.csv") == slurp(w / "data2" / "samples.csv"));
  CHECK(slurp(w / "data" / "dataset.json") == slurp(w / "data2" / "dataset.json"));
  REQUIRE(run("gen-data" + c + " --seed 8 --out " + (w / "data3").string()) == 0);
  CHECK(slurp(w / "data" / "samples.csv") != slurp(w / "data3" / "samples.csv"));

  REQUIRE(run("train --data " + (w / "data").string() + c + " --out " + (w / "model").string()) == 0);
  for (const char* f : {"checkpoint.json", "lifted_model.json", "training_history.csv", "metrics.json"})
    CHECK(fs::exists(w / "model" / f));
  CHECK(lines(slurp(w / "model" / "training_history.csv")) == 4);
  const json metrics = json::parse(slurp(w / "model" / "metrics.json"));
  CHECK(metrics["train_samples"].get<int>() + metrics["test_samples"].get<int>() == 60);
  REQUIRE(run("train --data " + (w / "data").string() + c + " --out " + (w / "model2").string()) == 0);
  CHECK(slurp(w / "model" / "lifted_model.json") == slurp(w / "model2" / "lifted_model.json"));

  REQUIRE(run("fit-edmd --data " + (w / "data").string() + " --dict poly:2 --ridge 1e-6 --out " +
              (w / "edmd").string()) == 0);
  const json lm = json::parse(slurp(w / "edmd" / "lifted_model.json"));
  CHECK(lm["kind"] == "edmd");
  CHECK(lm["N"] == 1 + 24 + 24 * 25 / 2);

  const std::string model = " --model " + (w / "model" / "lifted_model.json").string();
  REQUIRE(run("run-mpc" + model + c + " --load 1.05 --out " + (w / "mpc").string()) == 0);
  const json diag = json::parse(slurp(w / "mpc" / "diagnostics.json"));
  CHECK(diag["load_factor"] == 1.05);
  CHECK(diag["instants"].size() == 5);
  CHECK(lines(slurp(w / "mpc" / "closed_loop.csv")) == 26);

  REQUIRE(run("compare" + model + c + " --out " + (w / "cmp").string()) == 0);
  CHECK(lines(slurp(w / "cmp" / "report.csv")) == 4);
  CHECK(json::parse(slurp(w / "cmp" / "report.json"))["cases"] == 3);
  REQUIRE(run("compare" + model + c + " --out " + (w / "cmp2").string()) == 0);
  CHECK(slurp(w / "cmp" / "report.csv") == slurp(w / "cmp2" / "report.csv"));

  SUBCASE("zero actuator range matches the uncontrolled episode byte for byte") {
    const fs::path off = write_config("off.json", [](json& j) { j["mpc"] = {{"u_max", 0.0}}; });
    REQUIRE(run("run-mpc" + model + " --config " + off.string() + " --out " + (w / "off").string()) == 0);
    const kmpc::RunConfig rc = kmpc::load_run_config(off);
    const kmpc::Trajectory ref = kmpc::run_episode(rc.setup.plant, rc.setup.schedule, rc.setup.fault,
                                                   kmpc::zero_policy(rc.setup.plant.m));
    CHECK(slurp(w / "off" / "closed_loop.csv") == kmpc::trajectory_to_csv(ref));
  }
}

TEST_CASE("shipped default config sample count") {
  fs::create_directories(kWork);
  const fs::path cfg = fs::path(KMPC_SOURCE_DIR) / "configs" / "default.json";
  REQUIRE(run("gen-data --config " + cfg.string() + " --out " + (kWork / "shipped").string()) == 0);
  const kmpc::RunConfig rc = kmpc::load_run_config(cfg);
  const json meta = json::parse(slurp(kWork / "shipped" / "dataset.json"));
  CHECK(meta["n_samples"] == rc.dataset.n_loads * 3 * rc.setup.schedule.n_instants);
  fs::remove_all(kWork);
}

TEST_CASE("fit-edmd takes defaults from the config") {
  fs::create_directories(kWork);
  const fs::path cfg = write_config("edmd.json", [](json& j) { j["edmd"] = {{"dictionary", "poly:2"}, {"ridge", 1e-4}}; });
  REQUIRE(run("gen-data --config " + cfg.string() + " --out " + (kWork / "data").string()) == 0);
  REQUIRE(run("fit-edmd --data " + (kWork / "data").string() + " --config " + cfg.string() + " --out " +
              (kWork / "e1").string()) == 0);
  const json m1 = json::parse(slurp(kWork / "e1" / "metrics.json"));
  CHECK(m1["ridge"] == 1e-4);
  CHECK(m1["lifted_dim"] == 1 + 24 + 24 * 25 / 2);
  REQUIRE(run("fit-edmd --data " + (kWork / "data").string() + " --config " + cfg.string() +
              " --dict identity --out " + (kWork / "e2").string()) == 0);
  CHECK(json::parse(slurp(kWork / "e2" / "metrics.json"))["lifted_dim"] == 25);
  fs::remove_all(kWork);
}

TEST_CASE("paper-mirror pipeline smoke run") {
  fs::create_directories(kWork);
  json j = json::parse(slurp(fs::path(KMPC_SOURCE_DIR) / "configs" / "paper_mirror.json"));
  j["plant_config"] = (fs::path(KMPC_SOURCE_DIR) / "configs" / "paper_mirror_plant.json").string();
  j["dataset"]["n_loads"] = 3;
  j["kdnn"] = {{"lifted_dim", 16}, {"hidden", 4}, {"max_epochs", 2}, {"patience", 0}};
  j["eval"]["cases"] = 2;
  const fs::path cfg = kWork / "mirror.json";
  std::ofstream(cfg) << j.dump();
  const std::string c = " --config " + cfg.string();
  const fs::path w = kWork / "mirror";
  REQUIRE(run("gen-data" + c + " --out " + (w / "data").string()) == 0);
  REQUIRE(run("train --data " + (w / "data").string() + c + " --out " + (w / "model").string()) == 0);
  const std::string model = " --model " + (w / "model" / "lifted_model.json").string();
  REQUIRE(run("run-mpc" + model + c + " --out " + (w / "mpc").string()) == 0);
  REQUIRE(run("compare" + model + c + " --out " + (w / "cmp").string()) == 0);
  for (const char* f : {"data/dataset.json", "data/samples.csv", "model/checkpoint.json", "model/lifted_model.json",
                        "model/training_history.csv", "model/metrics.json", "mpc/closed_loop.csv",
                        "mpc/diagnostics.json", "cmp/report.csv", "cmp/report.json"})
    CHECK_MESSAGE(fs::exists(w / f), f);
  CHECK(json::parse(slurp(w / "data" / "dataset.json"))["n"] == 12);
  CHECK(slurp(w / "mpc" / "closed_loop.csv").rfind("time,v0,", 0) == 0);
  fs::remove_all(kWork);
}

TEST_CASE("errors are reported as JSON") {
  fs::create_directories(kWork);
  CHECK(run("gen-data --config " + (kWork / "absent.json").string() + " --out " + kWork.string(), "e1") == 1);
  const json e1 = json::parse(slurp(kWork / "e1.err"));
  CHECK(e1["error"] == "ConfigError");

  const fs::path bad = write_config("bad.json", [](json& j) {
    j.erase("seed");
    j["mpc"] = {{"tol", -1.0}};
  });
  CHECK(run("gen-data --config " + bad.string() + " --out " + kWork.string(), "e2") == 1);
  const json e2 = json::parse(slurp(kWork / "e2.err"));
  CHECK(e2["violations"].size() == 2);

  CHECK(run("frobnicate", "e3") == 2);
  CHECK(json::parse(slurp(kWork / "e3.err"))["error"] == "UsageError");
  CHECK(run("run-mpc --model " + (kWork / "none.json").string() + " --config " + bad.string() + " --out x", "e4") == 1);
  fs::remove_all(kWork);
}
