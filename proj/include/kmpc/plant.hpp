#pragma once

// Surrogate controlled voltage dynamics on an n-bus network:
//
//   dv_i/dt = a_i (v*_i - v_i) + b_i (v*_i - v_i)^3
//           + c sum_j W_ij ((v_j - v*_j) - (v_i - v*_i))
//           + (sum_l gamma_il u_l) (v_max - v_i),
//
// with load-dependent equilibrium v*(lambda) = 1 - 0.3 lambda d. Integrated
// with classical RK4, state clamped to [0, v_max] after every substep.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "kmpc/matrix.hpp"

namespace kmpc {

struct PlantModel {
  std::size_t n = 0;
  std::size_t m = 0;
  Vector a;       // linear recovery rates, 1/s
  Vector b;       // cubic recovery gains, 1/s
  double c = 0.0; // coupling strength, 1/s
  Matrix w;       // n x n row-stochastic adjacency, zero diagonal
  Matrix gamma;   // n x m control injection
  double v_max = 1.1;
  Vector d;       // load sensitivities in [0, 1]
  double lambda = 1.0;
  double u_max = 0.25;

  // Throws ArgumentError listing every violated invariant.
  void validate() const;

  Vector equilibrium() const;
  PlantModel with_load(double load_factor) const;
};

// Defaults used by the shipped configs/default_plant.json.
PlantModel default_plant();

struct PlantState {
  Vector v;
  double t = 0.0;
};

struct Schedule {
  double ts = 0.75;
  double tc = 3.0;
  std::size_t n_instants = 5;
  std::size_t h = 4;  // samples per control interval, tc == h * ts

  // Builds and validates (Tc must be an integer multiple of Ts).
  static Schedule make(double ts, double tc, std::size_t n_instants);
  void validate() const;
};

struct Fault {
  std::vector<std::size_t> affected;
  double depth = 0.3;
};

// Voltage samples at spacing Ts (row s = sample s, n columns) and the
// zero-order-held controls (row k = control applied over interval k).
struct Trajectory {
  double ts = 0.0;
  std::size_t h = 0;
  Matrix voltages;
  Matrix controls;

  std::size_t samples() const { return voltages.rows(); }
  std::size_t intervals() const { return controls.rows(); }
  double time(std::size_t sample) const { return ts * static_cast<double>(sample); }
};

// Control for interval `instant`; `so_far` holds every sample up to and
// including the sample at that instant.
using ControlPolicy =
    std::function<Vector(std::size_t instant, const Trajectory& so_far)>;

// Number of internal RK4 substeps per call to step().
inline constexpr int kRk4Substeps = 4;

Vector vector_field(const PlantModel& plant, std::span<const double> v,
                    std::span<const double> u);

PlantState step(const PlantModel& plant, const PlantState& state,
                std::span<const double> u, double dt,
                int substeps = kRk4Substeps);

PlantState apply_fault(const PlantState& state,
                       std::span<const std::size_t> affected, double depth);

Trajectory rollout(const PlantModel& plant, const PlantState& init,
                   const ControlPolicy& policy, const Schedule& sched);

// Post-fault episode: the plant starts at v*(lambda), the fault sag is
// applied at t = 0, one uncontrolled observation interval follows, then the
// policy acts at sched.n_instants control instants. The policy sees instant
// indices 0..n_instants-1; the returned trajectory holds
// (n_instants + 1) * H + 1 samples and n_instants + 1 control rows (the first
// all zero).
Trajectory run_episode(const PlantModel& plant, const Schedule& sched,
                       const Fault& fault, const ControlPolicy& policy);

ControlPolicy zero_policy(std::size_t m);
ControlPolicy constant_policy(Vector u);

}  // namespace kmpc
