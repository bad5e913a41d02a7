#include "kmpc/eval.hpp"

#include <algorithm>
#include <cmath>

#include "kmpc/error.hpp"
#include "kmpc/rng.hpp"
#include "kmpc/serialization.hpp"

namespace kmpc {

void VvcParams::validate() const {
  std::vector<std::string> bad;
  if (!(v_db <= v_ref)) bad.push_back("eval.v_db must not exceed v_ref");
  if (!(k_v >= 0.0)) bad.push_back("eval.k_v must be >= 0");
  if (!(u_max >= 0.0)) bad.push_back("eval.u_max must be >= 0");
  if (!bad.empty()) throw ConfigError(bad);
}

double vvc_control(double v_local, const VvcParams& p) {
  return std::clamp(p.k_v * std::max(0.0, p.v_db - v_local), 0.0, p.u_max);
}

ControlPolicy vvc_policy(const PlantModel& plant, const VvcParams& params) {
  params.validate();
  std::vector<std::size_t> bus(plant.m, 0);
  for (std::size_t l = 0; l < plant.m; ++l)
    for (std::size_t i = 1; i < plant.n; ++i)
      if (plant.gamma(i, l) > plant.gamma(bus[l], l)) bus[l] = i;
  return [bus, params](std::size_t, const Trajectory& so_far) {
    const std::size_t last = so_far.samples() - 1;
    Vector u(bus.size());
    for (std::size_t l = 0; l < bus.size(); ++l) u[l] = vvc_control(so_far.voltages(last, bus[l]), params);
    return u;
  };
}

double performance_index(const Trajectory& traj, double v_ref,
                         const std::vector<std::size_t>& monitored) {
  if (monitored.empty()) throw ArgumentError("performance_index: monitored set is empty");
  if (traj.samples() == 0) throw ArgumentError("performance_index: trajectory is empty");
  for (std::size_t i : monitored)
    if (i >= traj.voltages.cols())
      throw IndexError("performance_index: bus " + std::to_string(i) + " out of range");
  double j = 0.0;
  for (std::size_t s = 0; s < traj.samples(); ++s)
    for (std::size_t i : monitored) j += std::abs(traj.voltages(s, i) - v_ref);
  return j;
}

double cumulative_control(const Trajectory& traj) {
  double total = 0.0;
  for (double u : traj.controls.values()) total += u;
  return total;
}

double case_load_factor(std::uint64_t seed, std::size_t index, double lo, double hi) {
  Rng rng(mix_seed(seed, index, 0x434F4D50ULL));
  return rng.uniform(lo, hi);
}

ComparisonReport compare(const LiftedModel& model, const PlantModel& plant,
                         const Schedule& sched, const Fault& fault, const CompareSettings& s) {
  if (s.n_cases < 1) throw ArgumentError("compare: n_cases must be >= 1");
  if (!(s.load_lo <= s.load_hi)) throw ArgumentError("compare: load range is empty");
  std::vector<std::size_t> monitored = s.monitored;
  if (monitored.empty())
    for (std::size_t i = 0; i < plant.n; ++i) monitored.push_back(i);

  ComparisonReport report;
  report.seed = s.seed;
  std::size_t wins = 0;
  for (std::size_t c = 0; c < s.n_cases; ++c) {
    CaseRecord rec;
    rec.index = c;
    rec.seed = mix_seed(s.seed, c, 0x434F4D50ULL);
    rec.load_factor = case_load_factor(s.seed, c, s.load_lo, s.load_hi);
    const PlantModel p = plant.with_load(rec.load_factor);
    try {
      rec.j_none = performance_index(run_episode(p, sched, fault, zero_policy(p.m)),
                                     s.mpc.v_ref, monitored);
      rec.j_vvc = performance_index(run_episode(p, sched, fault, vvc_policy(p, s.vvc)),
                                    s.mpc.v_ref, monitored);
      const ClosedLoopResult mpc = receding_horizon(model, p, sched, fault, s.mpc);
      if (mpc.aborted) {
        rec.error = mpc.error;
      } else {
        rec.j_mpc = performance_index(mpc.trajectory, s.mpc.v_ref, monitored);
        rec.mpc_control = cumulative_control(mpc.trajectory);
        rec.mpc_wins = rec.j_mpc < rec.j_vvc;
      }
    } catch (const Error& e) {
      rec.error = std::string(e.kind()) + ": " + e.what();
    }
    if (!rec.error.empty()) ++report.failed;
    if (rec.mpc_wins) ++wins;
    report.cases.push_back(rec);
  }
  const double n = static_cast<double>(s.n_cases);
  report.win_fraction = static_cast<double>(wins) / n;
  std::size_t ok = 0;
  for (const CaseRecord& r : report.cases) {
    if (!r.error.empty()) continue;
    ++ok;
    report.mean_none += r.j_none;
    report.mean_vvc += r.j_vvc;
    report.mean_mpc += r.j_mpc;
  }
  if (ok > 0) {
    report.mean_none /= static_cast<double>(ok);
    report.mean_vvc /= static_cast<double>(ok);
    report.mean_mpc /= static_cast<double>(ok);
  }
  return report;
}

std::string report_to_csv(const ComparisonReport& report) {
  std::string out = "case,seed,load_factor,j_no_control,j_vvc,j_kmpc,kmpc_control,kmpc_wins,error\n";
  for (const CaseRecord& r : report.cases) {
    std::string line = std::to_string(r.index) + "," + hex64(r.seed);
    for (double v : {r.load_factor, r.j_none, r.j_vvc, r.j_mpc, r.mpc_control})
      append_csv_number(line, v);
    line += r.mpc_wins ? ",1," : ",0,";
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += line + err + '\n';
  }
  return out;
}

nlohmann::ordered_json report_to_json(const ComparisonReport& report) {
  nlohmann::ordered_json j;
  j["cases"] = report.cases.size();
  j["failed"] = report.failed;
  j["win_fraction"] = report.win_fraction;
  j["mean_j_no_control"] = report.mean_none;
  j["mean_j_vvc"] = report.mean_vvc;
  j["mean_j_kmpc"] = report.mean_mpc;
  j["seed"] = report.seed;
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  for (const CaseRecord& r : report.cases) seeds.push_back(hex64(r.seed));
  j["case_seeds"] = seeds;
  return j;
}

}  // namespace kmpc
