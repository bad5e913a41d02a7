#pragma once

// Shrinking-horizon MPC in the lifted space:
//
//   min  sum_{i=0}^{Nk-1} (Z_{k+i+1} - Z_ref)^T Q (Z_{k+i+1} - Z_ref) + U_{k+i}^T R U_{k+i}
//   s.t. Z_{k+i+1} = A Z_{k+i} + B U_{k+i},   u_min <= U_{k+i} <= u_max
//
// condensed over the stacked controls into a box-constrained QP.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "kmpc/lifted_model.hpp"
#include "kmpc/plant.hpp"

namespace kmpc {

struct MpcProblem {
  Matrix a;  // N x N
  Matrix b;  // N x m
  Vector z;
  Vector z_ref;
  std::size_t horizon = 1;  // N_k
  Matrix q;  // N x N, symmetric PSD
  Matrix r;  // m x m, symmetric PSD
  Vector u_min, u_max;

  // Throws ShapeError on dimension mismatches, ArgumentError otherwise.
  void validate() const;
};

// The QP is stored in the half form  f(U) = 1/2 U^T G U + g^T U.  The MPC cost
// equals U^T G U + 2 g^T U + constant.
struct CondensedQp {
  std::size_t horizon = 0, m = 0;
  Matrix s;  // (N*Nk) x (m*Nk), block (i, j) = A^(i-j) B for j <= i
  Matrix t;  // (N*Nk) x N, block i = A^(i+1)
  Matrix hessian;  // G = S^T Qbar S + Rbar
  Vector linear;   // g = S^T Qbar (T z - Zr)
  double constant = 0.0;  // (T z - Zr)^T Qbar (T z - Zr)
  Vector lower, upper;  // stacked box
};

CondensedQp condense(const MpcProblem& problem);

// U is stacked (step-major, m entries per step).
double mpc_cost(const MpcProblem& problem, std::span<const double> u);
double qp_cost(const CondensedQp& qp, std::span<const double> u);
double qp_half_objective(const CondensedQp& qp, std::span<const double> u);
Vector qp_gradient(const CondensedQp& qp, std::span<const double> u);

// Largest violation of the box-QP optimality conditions at U: |grad| on free
// coordinates, the inward-pointing part of grad at active bounds.
double kkt_violation(const CondensedQp& qp, std::span<const double> u, double bound_tol = 1e-12);

struct QpSettings {
  double tol = 1e-8;
  std::size_t max_iter = 50000;
  bool record_trace = false;
};

struct QpResult {
  Vector u;
  std::size_t iterations = 0;
  double residual = 0.0;   // projected-gradient norm at u
  double lipschitz = 0.0;  // L_max estimate
  double objective = 0.0;  // half-form objective
  std::vector<double> trace;  // half-form objective per iterate when requested
};

// Projected gradient with fixed step 1/L_max from the clamped zero vector.
// Throws NonConvergenceError carrying the final residual after max_iter.
QpResult solve_box_qp(const CondensedQp& qp, const QpSettings& settings = {});

// Row k of the result is the control for step k.
Matrix unstack(std::span<const double> u, std::size_t m);

struct MpcSettings {
  double q_weight = 1.0;  // Q = q_weight * I
  double r_weight = 0.0;  // R = r_weight * I
  double u_min = 0.0;     // p.u., every channel
  double u_max = 0.25;
  double v_ref = 1.0;
  QpSettings qp;
};

struct InstantDiagnostics {
  std::size_t instant = 0;
  std::size_t horizon = 0;
  double time = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double residual = 0.0;
  double lipschitz = 0.0;
  double cost = 0.0;  // MPC cost of the returned plan
  Vector u_normalized;
  Vector u_applied;   // p.u.
  std::string error;
};

struct ClosedLoopResult {
  Trajectory trajectory;
  std::vector<InstantDiagnostics> diagnostics;
  bool aborted = false;  // a solve failed; trajectory ends at that instant
  std::string error;
  double v_ref = 1.0;
};

// Builds the instant-k problem from a lifted state and the remaining horizon.
MpcProblem make_problem(const LiftedModel& model, const Vector& z, const Vector& z_ref,
                        std::size_t horizon, const MpcSettings& settings);

// Normalized image of the p.u. control box.
std::pair<double, double> normalized_box(const LiftedModel& model, const MpcSettings& settings);

ClosedLoopResult receding_horizon(const LiftedModel& model, const PlantModel& plant,
                                  const Schedule& sched, const Fault& fault,
                                  const MpcSettings& settings);

// Closed loop with the lifted linear model standing in for the plant,
// starting from z0. Returns the instant-0 plan and the applied controls.
struct LiftedLoop {
  Matrix plan;
  Matrix applied;
};
LiftedLoop lifted_closed_loop(const LiftedModel& model, const Vector& z0, const Vector& z_ref,
                              std::size_t n_instants, const MpcSettings& settings);

// time, v[0..n-1], u[0..m-1]; the control column holds the zero-order-held
// input acting from that sample onward (the last sample repeats the last one).
std::string trajectory_to_csv(const Trajectory& traj);
nlohmann::ordered_json diagnostics_to_json(const ClosedLoopResult& result);

}  // namespace kmpc
