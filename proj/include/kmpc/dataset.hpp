#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kmpc/matrix.hpp"
#include "kmpc/plant.hpp"

namespace kmpc {

// n x H voltage window; column j is the sample (j + 1) Ts after the previous
// control instant, so the last column is the sample at the instant itself.
using HistoryMatrix = Matrix;

struct Sample {
  HistoryMatrix v_k;
  Vector u_k;
  HistoryMatrix v_next;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Voltages: x -> ((x - v_ref) - v_lo) / (v_hi - v_lo), into [0, 1] on the
// fitting data. Controls: u -> 2 (u - u_lo) / (u_hi - u_lo) - 1, into [-1, 1].
struct Scaler {
  double v_ref = 1.0;
  double v_lo = 0.0;
  double v_hi = 1.0;
  double u_lo = 0.0;
  double u_hi = 0.25;

  void validate() const;

  double normalize_voltage(double x) const { return ((x - v_ref) - v_lo) / (v_hi - v_lo); }
  double denormalize_voltage(double y) const { return y * (v_hi - v_lo) + v_lo + v_ref; }
  double normalize_control(double u) const { return 2.0 * (u - u_lo) / (u_hi - u_lo) - 1.0; }
  double denormalize_control(double y) const { return (y + 1.0) * 0.5 * (u_hi - u_lo) + u_lo; }

  friend bool operator==(const Scaler&, const Scaler&) = default;
};

struct DatasetMeta {
  std::uint64_t seed = 0;
  std::uint64_t plant_digest = 0;
  std::size_t n_loads = 0;
  std::string policy_mix;

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
  std::size_t n = 0;
  std::size_t h = 0;
  std::size_t m = 0;
  std::vector<Sample> samples;
  std::optional<Scaler> scaler;
  DatasetMeta meta;

  std::size_t size() const { return samples.size(); }
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Samples (k-1)H+1 .. kH of the trajectory, 1 <= k <= traj.intervals().
HistoryMatrix window_history(const Trajectory& traj, std::size_t k);

enum class PolicyMix {
  standard,   // zero, full (u_max), uniform random per channel and instant
  zero_only,  // debug: only the all-zero policy
};

struct GenerateOptions {
  PolicyMix mix = PolicyMix::standard;
  double load_lo = 0.9;
  double load_hi = 1.1;
  std::uint64_t plant_digest = 0;
};

// One episode per (load case, policy); each yields sched.n_instants triples.
// Load factor and random controls come from streams seeded by
// mix_seed(seed, load_index, policy_index).
Dataset generate(const PlantModel& plant, const Schedule& sched,
                 const Fault& fault, std::size_t n_loads, std::uint64_t seed,
                 const GenerateOptions& options = {});

double load_factor_for(std::uint64_t seed, std::size_t load_index,
                       double lo = 0.9, double hi = 1.1);

Scaler fit_scaler(const Dataset& ds, double v_ref = 1.0, double u_lo = 0.0,
                  double u_hi = 0.25);

// Samples packed contiguously in normalized units, ready for training.
struct NormalizedSet {
  std::size_t n = 0, h = 0, m = 0, count = 0;
  Vector v_k;     // count x (n*H), each row a row-major n x H window
  Vector u;       // count x m
  Vector v_next;  // count x (n*H)

  std::size_t window_size() const { return n * h; }
  std::span<const double> v_k_row(std::size_t i) const {
    return {v_k.data() + i * window_size(), window_size()};
  }
  std::span<const double> u_row(std::size_t i) const { return {u.data() + i * m, m}; }
  std::span<const double> v_next_row(std::size_t i) const {
    return {v_next.data() + i * window_size(), window_size()};
  }
};

NormalizedSet normalize(const Dataset& ds, const Scaler& scaler);
HistoryMatrix normalize(const HistoryMatrix& v, const Scaler& scaler);
HistoryMatrix denormalize(const HistoryMatrix& v, const Scaler& scaler);

// Shuffled partition: floor(ratio * N) samples go to the first set.
std::pair<Dataset, Dataset> split(const Dataset& ds, double ratio, std::uint64_t seed);

// dataset.json (manifest) + samples.csv under dir.
void save(const Dataset& ds, const std::filesystem::path& dir);
Dataset load(const std::filesystem::path& dir);

}  // namespace kmpc
