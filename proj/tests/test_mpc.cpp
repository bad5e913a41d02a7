#include <cmath>

#include "doctest.h"
#include "kmpc/edmd.hpp"
#include "kmpc/error.hpp"
#include "kmpc/mpc.hpp"
#include "mpc_oracles.hpp"

using namespace kmpc;

namespace {

MpcProblem scalar_problem(double a, double b, double z, double z_ref, std::size_t horizon,
                          double lo, double hi) {
  MpcProblem p;
  p.a = Matrix{{a}};
  p.b = Matrix{{b}};
  p.z = {z};
  p.z_ref = {z_ref};
  p.horizon = horizon;
  p.q = Matrix{{1.0}};
  p.r = Matrix{{0.0}};
  p.u_min = {lo};
  p.u_max = {hi};
  return p;
}

QpSettings tight() {
  QpSettings s;
  s.tol = 1e-11;
  s.max_iter = 1000000;
  return s;
}

// Identity-dictionary EDMD model of the default surrogate.
LiftedModel surrogate_model() {
  const PlantModel plant = default_plant();
  const Schedule sched = Schedule::make(0.75, 3.0, 5);
  const Fault fault{{1, 2, 3}, 0.3};
  Dataset ds = generate(plant, sched, fault, 6, 77);
  ds.scaler = fit_scaler(ds, 1.0, 0.0, plant.u_max);
  return to_lifted_model(fit(ds, Dictionary::identity(plant.n * sched.h), 1e-8));
}

}  // namespace

TEST_CASE("one-step condensation") {
  Rng rng(1);
  MpcProblem p = oracle::random_problem(rng, 4, 2, 1);
  const CondensedQp qp = condense(p);
  const Matrix g = p.b.transposed() * p.q * p.b + p.r;
  CHECK(max_abs_diff(qp.hessian.values(), g.values()) < 1e-12);
  Vector e = matvec(p.a, p.z);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] -= p.z_ref[i];
  const Vector lin = matvec_t(p.b, matvec(p.q, e));
  CHECK(max_abs_diff(qp.linear, lin) < 1e-12);
  CHECK(qp.constant == doctest::Approx(oracle::quad(p.q, e)).epsilon(1e-12));
}

TEST_CASE("A = 0 gives a block-diagonal Hessian") {
  Rng rng(2);
  MpcProblem p = oracle::random_problem(rng, 3, 2, 4);
  p.a = Matrix(3, 3);
  const CondensedQp qp = condense(p);
  const Matrix block = p.b.transposed() * p.q * p.b + p.r;
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) {
      const double expect = r / 2 == c / 2 ? block(r % 2, c % 2) : 0.0;
      CHECK(std::abs(qp.hessian(r, c) - expect) < 1e-12);
    }
}

TEST_CASE("condensed cost equals the direct rollout cost") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t big_n = 1 + trial % 6, m = 1 + trial % 3, nk = 1 + trial % 5;
    const MpcProblem p = oracle::random_problem(rng, big_n, m, nk);
    const CondensedQp qp = condense(p);
    const Vector u = oracle::random_vector(rng, m * nk, -1.0, 1.0);
    const double direct = oracle::direct_cost(p, u);
    CHECK(std::abs(qp_cost(qp, u) - direct) < 1e-10 * std::max(1.0, std::abs(direct)));
    CHECK(std::abs(mpc_cost(p, u) - direct) < 1e-10 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("scalar QP clamps to the bound") {
  // cost (u - 2)^2 on [0, 1]
  const CondensedQp qp = condense(scalar_problem(0.0, 1.0, 0.0, 2.0, 1, 0.0, 1.0));
  const QpResult res = solve_box_qp(qp);
  CHECK(res.u[0] == 1.0);
  CHECK(qp_cost(qp, res.u) == doctest::Approx(1.0));
  CHECK(kkt_violation(qp, res.u) == 0.0);
}

TEST_CASE("interior optimum matches the linear solve") {
  Rng rng(4);
  for (std::size_t dim : {1u, 2u, 5u, 12u}) {
    const oracle::InteriorQp iq = oracle::interior_qp(rng, dim);
    const QpResult res = solve_box_qp(iq.qp, tight());
    CHECK(max_abs_diff(res.u, iq.expected) < 1e-6);
  }
}

TEST_CASE("constant objective returns clamp(0)") {
  CondensedQp qp;
  qp.horizon = 1;
  qp.m = 3;
  qp.hessian = Matrix(3, 3);
  qp.linear = {0.0, 0.0, 0.0};
  qp.lower = {0.2, -1.0, -2.0};
  qp.upper = {1.0, 1.0, -0.5};
  const QpResult res = solve_box_qp(qp);
  CHECK(res.u == Vector{0.2, 0.0, -0.5});
  CHECK(res.iterations == 0);

  qp.linear = {1.0, -1.0, 0.0};
  CHECK(solve_box_qp(qp).u == Vector{0.2, 1.0, -0.5});
}

TEST_CASE("solver beats a brute-force grid on small instances") {
  Rng rng(5);
  const std::size_t shapes[][2] = {{1, 1}, {1, 2}, {1, 3}, {2, 1}, {3, 1}};
  for (int trial = 0; trial < 20; ++trial) {
    const auto& s = shapes[trial % 5];
    const MpcProblem p = oracle::random_problem(rng, 3, s[0], s[1]);
    const CondensedQp qp = condense(p);
    const QpResult res = solve_box_qp(qp, tight());
    const double grid = oracle::grid_minimum(qp.lower, qp.upper, 51,
                                             [&](const Vector& u) { return oracle::direct_cost(p, u); });
    CHECK(oracle::direct_cost(p, res.u) <= grid + 1e-6);
  }
}

TEST_CASE("iterates are feasible, descend monotonically and satisfy KKT") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const MpcProblem p = oracle::random_problem(rng, 5, 2, 1 + trial % 4);
    const CondensedQp qp = condense(p);
    QpSettings st = tight();
    st.record_trace = true;
    const QpResult res = solve_box_qp(qp, st);
    for (std::size_t i = 0; i < res.u.size(); ++i) {
      CHECK(res.u[i] >= qp.lower[i]);
      CHECK(res.u[i] <= qp.upper[i]);
    }
    REQUIRE(res.trace.size() == res.iterations + 1);
    for (std::size_t k = 1; k < res.trace.size(); ++k)
      CHECK(res.trace[k] <= res.trace[k - 1] + 1e-12 * std::max(1.0, std::abs(res.trace[k - 1])));
    CHECK(kkt_violation(qp, res.u) < 1e-9);
    CHECK(res.residual < 1e-11);
  }
}

TEST_CASE("iteration cap raises NonConvergenceError") {
  Rng rng(7);
  const CondensedQp qp = condense(oracle::random_problem(rng, 6, 3, 4));
  QpSettings st;
  st.max_iter = 1;
  st.tol = 1e-14;
  CHECK_THROWS_AS(solve_box_qp(qp, st), NonConvergenceError);
  try {
    solve_box_qp(qp, st);
  } catch (const NonConvergenceError& e) {
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("problem validation") {
  Rng rng(8);
  MpcProblem p = oracle::random_problem(rng, 3, 2, 2);
  p.q(0, 1) += 0.1;
  CHECK_THROWS_AS(condense(p), ArgumentError);
  p = oracle::random_problem(rng, 3, 2, 2);
  p.z.pop_back();
  CHECK_THROWS_AS(condense(p), ShapeError);
  p = oracle::random_problem(rng, 3, 2, 2);
  p.horizon = 0;
  CHECK_THROWS_AS(condense(p), ArgumentError);
  p = oracle::random_problem(rng, 3, 2, 2);
  p.u_min[0] = 2.0;
  CHECK_THROWS_AS(condense(p), ArgumentError);
}

TEST_CASE("with a perfect model the closed loop follows the first plan") {
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    LiftedModel model;
    model.lifting = Dictionary::identity(4);
    model.a = oracle::random_matrix(rng, 4, 4, 0.4);
    model.b = oracle::random_matrix(rng, 4, 2, 1.0);
    model.n = 4;
    model.h = 1;
    model.m = 2;
    MpcSettings s;
    s.r_weight = 0.05;  // unique minimizer
    s.u_min = 0.0;
    s.u_max = 0.3;
    s.qp = tight();
    const Vector z0 = oracle::random_vector(rng, 4, -1.0, 0.0);
    const Vector zr = oracle::random_vector(rng, 4, 0.0, 1.0);
    const LiftedLoop loop = lifted_closed_loop(model, z0, zr, 5, s);
    CHECK(max_abs_diff(loop.plan.values(), loop.applied.values()) < 1e-6);
  }
}

TEST_CASE("shrinking-horizon closed loop on the surrogate") {
  const LiftedModel model = surrogate_model();
  const PlantModel plant = default_plant();
  const Schedule sched = Schedule::make(0.75, 3.0, 5);
  const Fault fault{{1, 2, 3}, 0.3};
  MpcSettings s;
  const ClosedLoopResult res = receding_horizon(model, plant, sched, fault, s);
  CHECK_FALSE(res.aborted);
  CHECK(res.trajectory.samples() == 25);
  REQUIRE(res.diagnostics.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(res.diagnostics[k].horizon == 5 - k);
    CHECK(res.diagnostics[k].converged);
    for (double u : res.trajectory.controls.row(k + 1)) {
      CHECK(u >= 0.0);
      CHECK(u <= 0.25);
    }
  }
  const std::string csv = trajectory_to_csv(res.trajectory);
  CHECK(csv.rfind("time,v0,v1,v2,v3,v4,v5,u0,u1,u2\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 26);
  CHECK(diagnostics_to_json(res)["instants"].size() == 5);

  SUBCASE("zero actuator range reproduces the uncontrolled episode") {
    MpcSettings off = s;
    off.u_max = 0.0;
    const ClosedLoopResult none = receding_horizon(model, plant, sched, fault, off);
    const Trajectory ref = run_episode(plant, sched, fault, zero_policy(plant.m));
    CHECK(none.trajectory.voltages == ref.voltages);
    CHECK(none.trajectory.controls == ref.controls);
  }
  SUBCASE("a failed solve aborts and truncates") {
    MpcSettings bad = s;
    bad.qp.max_iter = 1;
    bad.qp.tol = 1e-15;
    const ClosedLoopResult r = receding_horizon(model, plant, sched, fault, bad);
    CHECK(r.aborted);
    CHECK_FALSE(r.error.empty());
    CHECK(r.trajectory.samples() == 5);
    CHECK(r.trajectory.intervals() == 1);
  }
  SUBCASE("settings checks") {
    MpcSettings bad = s;
    bad.u_max = 0.5;
    CHECK_THROWS_AS(receding_horizon(model, plant, sched, fault, bad), ArgumentError);
    bad = s;
    bad.q_weight = -1.0;
    CHECK_THROWS_AS(receding_horizon(model, plant, sched, fault, bad), ConfigError);
  }
}
