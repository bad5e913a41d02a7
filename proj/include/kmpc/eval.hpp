#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "kmpc/lifted_model.hpp"
#include "kmpc/mpc.hpp"
#include "kmpc/plant.hpp"

namespace kmpc {

// Local rule-based volt-var control:
//   u = clamp(k_v * max(0, v_db - v_local), 0, u_max)
struct VvcParams {
  double v_db = 0.95;
  double k_v = 2.5;
  double u_max = 0.25;
  double v_ref = 1.0;

  void validate() const;
};

double vvc_control(double v_local, const VvcParams& params);

// Each channel l acts on the bus where column l of gamma is largest and reads
// that bus's latest voltage sample.
ControlPolicy vvc_policy(const PlantModel& plant, const VvcParams& params);

// Sum over every sample and monitored bus of |V - v_ref|.
double performance_index(const Trajectory& traj, double v_ref,
                         const std::vector<std::size_t>& monitored);

// Total control applied over the episode (sum over intervals and channels).
double cumulative_control(const Trajectory& traj);

struct CompareSettings {
  std::size_t n_cases = 100;
  std::uint64_t seed = 1;
  double load_lo = 0.9;
  double load_hi = 1.1;
  std::vector<std::size_t> monitored;  // empty: every bus
  VvcParams vvc;
  MpcSettings mpc;
};

struct CaseRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double load_factor = 0.0;
  double j_none = 0.0;
  double j_vvc = 0.0;
  double j_mpc = 0.0;
  double mpc_control = 0.0;
  bool mpc_wins = false;
  std::string error;  // empty when every loop ran to completion
};

struct ComparisonReport {
  std::vector<CaseRecord> cases;
  std::size_t failed = 0;
  double win_fraction = 0.0;  // over all cases; failed cases count as losses
  double mean_none = 0.0, mean_vvc = 0.0, mean_mpc = 0.0;
  std::uint64_t seed = 0;
};

double case_load_factor(std::uint64_t seed, std::size_t index, double lo, double hi);

ComparisonReport compare(const LiftedModel& model, const PlantModel& plant,
                         const Schedule& sched, const Fault& fault,
                         const CompareSettings& settings);

std::string report_to_csv(const ComparisonReport& report);
nlohmann::ordered_json report_to_json(const ComparisonReport& report);

}  // namespace kmpc
