#pragma once

// JSON configuration for the command-line pipeline. Every loader collects all
// violated fields before throwing ConfigError.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kmpc/eval.hpp"
#include "kmpc/kdnn.hpp"
#include "kmpc/mpc.hpp"
#include "kmpc/plant.hpp"

namespace kmpc {

struct PlantSetup {
  PlantModel plant;
  Schedule schedule;
  Fault fault;
};

PlantSetup default_setup();

PlantSetup plant_setup_from_json(const nlohmann::json& j);
nlohmann::ordered_json plant_setup_to_json(const PlantSetup& setup);
std::uint64_t plant_digest(const PlantSetup& setup);

struct DatasetParams {
  std::size_t n_loads = 2500;
  double split_ratio = 0.7;
  double v_ref = 1.0;
  double load_lo = 0.9;
  double load_hi = 1.1;
};

struct EdmdParams {
  std::string dictionary = "identity";
  double ridge = 1e-8;
};

struct RunConfig {
  std::uint64_t seed = 0;
  PlantSetup setup;
  DatasetParams dataset;
  KdnnConfig kdnn;
  TrainHyper train;
  EdmdParams edmd;
  MpcSettings mpc;
  VvcParams vvc;
  std::size_t cases = 100;
  std::vector<std::size_t> monitored;  // empty: every bus
};

// Relative plant_config paths resolve against base_dir.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace kmpc
