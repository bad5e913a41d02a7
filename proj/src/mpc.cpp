#include "kmpc/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kmpc/error.hpp"
#include "kmpc/linalg.hpp"
#include "kmpc/serialization.hpp"

namespace kmpc {

void MpcProblem::validate() const {
  const std::size_t big_n = a.rows();
  const std::size_t m = b.cols();
  if (a.cols() != big_n) throw ShapeError("mpc: A must be square");
  if (b.rows() != big_n) throw ShapeError("mpc: B must have as many rows as A");
  if (z.size() != big_n || z_ref.size() != big_n)
    throw ShapeError("mpc: lifted state and reference must have length N");
  if (q.rows() != big_n || q.cols() != big_n) throw ShapeError("mpc: Q must be N x N");
  if (r.rows() != m || r.cols() != m) throw ShapeError("mpc: R must be m x m");
  if (u_min.size() != m || u_max.size() != m) throw ShapeError("mpc: bounds must have length m");
  if (horizon < 1) throw ArgumentError("mpc: horizon must be >= 1");
  for (std::size_t i = 0; i < m; ++i)
    if (!(u_min[i] <= u_max[i])) throw ArgumentError("mpc: u_min must not exceed u_max");
  if (!linalg::is_symmetric_psd(q, 1e-10)) throw ArgumentError("mpc: Q is not symmetric PSD");
  if (m > 0 && !linalg::is_symmetric_psd(r, 1e-10))
    throw ArgumentError("mpc: R is not symmetric PSD");
}

CondensedQp condense(const MpcProblem& p) {
  p.validate();
  const std::size_t big_n = p.a.rows(), m = p.b.cols(), nk = p.horizon;
  CondensedQp qp;
  qp.horizon = nk;
  qp.m = m;
  qp.s = Matrix(big_n * nk, m * nk);
  qp.t = Matrix(big_n * nk, big_n);

  // powers_b[j] = A^j B
  std::vector<Matrix> powers_b{p.b};
  for (std::size_t j = 1; j < nk; ++j) powers_b.push_back(p.a * powers_b.back());
  Matrix power = p.a;
  for (std::size_t i = 0; i < nk; ++i) {
    if (i > 0) power = p.a * power;
    for (std::size_t r = 0; r < big_n; ++r)
      for (std::size_t c = 0; c < big_n; ++c) qp.t(i * big_n + r, c) = power(r, c);
    for (std::size_t j = 0; j <= i; ++j)
      for (std::size_t r = 0; r < big_n; ++r)
        for (std::size_t c = 0; c < m; ++c) qp.s(i * big_n + r, j * m + c) = powers_b[i - j](r, c);
  }

  // Free response minus reference, and Qbar applied blockwise.
  Vector e = matvec(qp.t, p.z);
  for (std::size_t i = 0; i < nk; ++i)
    for (std::size_t r = 0; r < big_n; ++r) e[i * big_n + r] -= p.z_ref[r];
  Matrix qs(big_n * nk, m * nk);
  Vector qe(big_n * nk);
  for (std::size_t i = 0; i < nk; ++i) {
    for (std::size_t r = 0; r < big_n; ++r) {
      for (std::size_t k = 0; k < big_n; ++k) {
        const double qrk = p.q(r, k);
        if (qrk == 0.0) continue;
        qe[i * big_n + r] += qrk * e[i * big_n + k];
        for (std::size_t c = 0; c < m * nk; ++c) qs(i * big_n + r, c) += qrk * qp.s(i * big_n + k, c);
      }
    }
  }
  qp.hessian = qp.s.transposed() * qs;
  for (std::size_t i = 0; i < nk; ++i)
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < m; ++c) qp.hessian(i * m + r, i * m + c) += p.r(r, c);
  // Symmetrize away rounding so the PSD check and power iteration see an exact
  // symmetric matrix.
  for (std::size_t r = 0; r < qp.hessian.rows(); ++r)
    for (std::size_t c = r + 1; c < qp.hessian.cols(); ++c) {
      const double v = 0.5 * (qp.hessian(r, c) + qp.hessian(c, r));
      qp.hessian(r, c) = v;
      qp.hessian(c, r) = v;
    }
  qp.linear = matvec_t(qp.s, qe);
  qp.constant = std::inner_product(e.begin(), e.end(), qe.begin(), 0.0);
  qp.lower.resize(m * nk);
  qp.upper.resize(m * nk);
  for (std::size_t i = 0; i < nk; ++i)
    for (std::size_t c = 0; c < m; ++c) {
      qp.lower[i * m + c] = p.u_min[c];
      qp.upper[i * m + c] = p.u_max[c];
    }
  return qp;
}

double mpc_cost(const MpcProblem& p, std::span<const double> u) {
  const std::size_t big_n = p.a.rows(), m = p.b.cols();
  if (u.size() != m * p.horizon) throw ShapeError("mpc_cost: control sequence has wrong length");
  Vector z = p.z;
  double cost = 0.0;
  for (std::size_t i = 0; i < p.horizon; ++i) {
    const auto ui = u.subspan(i * m, m);
    Vector next = matvec(p.a, z);
    const Vector bu = matvec(p.b, ui);
    for (std::size_t r = 0; r < big_n; ++r) next[r] += bu[r];
    Vector e(big_n);
    for (std::size_t r = 0; r < big_n; ++r) e[r] = next[r] - p.z_ref[r];
    const Vector qe = matvec(p.q, e);
    cost += std::inner_product(e.begin(), e.end(), qe.begin(), 0.0);
    const Vector ru = matvec(p.r, ui);
    cost += std::inner_product(ui.begin(), ui.end(), ru.begin(), 0.0);
    z = std::move(next);
  }
  return cost;
}

Vector qp_gradient(const CondensedQp& qp, std::span<const double> u) {
  Vector g = matvec(qp.hessian, u);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += qp.linear[i];
  return g;
}

double qp_half_objective(const CondensedQp& qp, std::span<const double> u) {
  const Vector gu = matvec(qp.hessian, u);
  double f = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) f += u[i] * (0.5 * gu[i] + qp.linear[i]);
  return f;
}

double qp_cost(const CondensedQp& qp, std::span<const double> u) {
  return 2.0 * qp_half_objective(qp, u) + qp.constant;
}

double kkt_violation(const CondensedQp& qp, std::span<const double> u, double bound_tol) {
  const Vector g = qp_gradient(qp, u);
  double worst = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const bool at_lower = u[i] <= qp.lower[i] + bound_tol;
    const bool at_upper = u[i] >= qp.upper[i] - bound_tol;
    double v = std::abs(g[i]);
    if (at_lower && at_upper) v = 0.0;
    else if (at_lower) v = std::max(0.0, -g[i]);
    else if (at_upper) v = std::max(0.0, g[i]);
    worst = std::max(worst, v);
  }
  return worst;
}

namespace {

void clamp_into(const CondensedQp& qp, Vector& u) {
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::clamp(u[i], qp.lower[i], qp.upper[i]);
}

double projected_gradient_norm(const CondensedQp& qp, const Vector& u, const Vector& grad) {
  double sq = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = std::clamp(u[i] - grad[i], qp.lower[i], qp.upper[i]) - u[i];
    sq += d * d;
  }
  return std::sqrt(sq);
}

}  // namespace

QpResult solve_box_qp(const CondensedQp& qp, const QpSettings& settings) {
  const std::size_t dim = qp.linear.size();
  if (qp.hessian.rows() != dim || qp.hessian.cols() != dim || qp.lower.size() != dim ||
      qp.upper.size() != dim)
    throw ShapeError("solve_box_qp: inconsistent QP dimensions");
  if (!(settings.tol > 0.0) || settings.max_iter == 0)
    throw ArgumentError("solve_box_qp: tol must be > 0 and max_iter >= 1");

  QpResult res;
  res.u.assign(dim, 0.0);
  clamp_into(qp, res.u);
  res.lipschitz = linalg::power_iteration(qp.hessian, 100);

  Vector grad = qp_gradient(qp, res.u);
  if (res.lipschitz <= 0.0) {
    // Linear (or constant) objective: each coordinate goes to the bound its
    // gradient points away from; zero-gradient coordinates keep clamp(0).
    for (std::size_t i = 0; i < dim; ++i) {
      if (qp.linear[i] > 0.0) res.u[i] = qp.lower[i];
      else if (qp.linear[i] < 0.0) res.u[i] = qp.upper[i];
    }
    grad = qp_gradient(qp, res.u);
    res.residual = projected_gradient_norm(qp, res.u, grad);
    res.objective = qp_half_objective(qp, res.u);
    if (settings.record_trace) res.trace.push_back(res.objective);
    return res;
  }

  const double step = 1.0 / res.lipschitz;
  res.residual = projected_gradient_norm(qp, res.u, grad);
  if (settings.record_trace) res.trace.push_back(qp_half_objective(qp, res.u));
  while (res.residual >= settings.tol) {
    if (res.iterations >= settings.max_iter) {
      throw NonConvergenceError("solve_box_qp: no convergence after " +
                                    std::to_string(settings.max_iter) +
                                    " iterations (projected-gradient norm " +
                                    format_number(res.residual) + ")",
                                res.residual);
    }
    for (std::size_t i = 0; i < dim; ++i)
      res.u[i] = std::clamp(res.u[i] - step * grad[i], qp.lower[i], qp.upper[i]);
    ++res.iterations;
    grad = qp_gradient(qp, res.u);
    res.residual = projected_gradient_norm(qp, res.u, grad);
    if (settings.record_trace) res.trace.push_back(qp_half_objective(qp, res.u));
  }
  res.objective = qp_half_objective(qp, res.u);
  return res;
}

Matrix unstack(std::span<const double> u, std::size_t m) {
  if (m == 0 || u.size() % m != 0) throw ShapeError("unstack: length is not a multiple of m");
  return Matrix(u.size() / m, m, Vector(u.begin(), u.end()));
}

std::pair<double, double> normalized_box(const LiftedModel& model, const MpcSettings& s) {
  if (!model.scaler) return {s.u_min, s.u_max};
  return {model.scaler->normalize_control(s.u_min), model.scaler->normalize_control(s.u_max)};
}

MpcProblem make_problem(const LiftedModel& model, const Vector& z, const Vector& z_ref,
                        std::size_t horizon, const MpcSettings& s) {
  const std::size_t big_n = model.lifted_dim();
  MpcProblem p;
  p.a = model.a;
  p.b = model.b;
  p.z = z;
  p.z_ref = z_ref;
  p.horizon = horizon;
  p.q = s.q_weight * Matrix::identity(big_n);
  p.r = s.r_weight * Matrix::identity(model.m);
  const auto [lo, hi] = normalized_box(model, s);
  p.u_min.assign(model.m, lo);
  p.u_max.assign(model.m, hi);
  return p;
}

namespace {

void check_settings(const MpcSettings& s) {
  std::vector<std::string> bad;
  if (!(s.q_weight >= 0.0)) bad.push_back("mpc.q_weight must be >= 0");
  if (!(s.r_weight >= 0.0)) bad.push_back("mpc.r_weight must be >= 0");
  if (!(s.u_min >= 0.0)) bad.push_back("mpc.u_min must be >= 0");
  if (!(s.u_max >= s.u_min)) bad.push_back("mpc.u_max must be >= mpc.u_min");
  if (!(s.qp.tol > 0.0)) bad.push_back("mpc.tol must be > 0");
  if (s.qp.max_iter == 0) bad.push_back("mpc.max_iter must be >= 1");
  if (!bad.empty()) throw ConfigError(bad);
}

}  // namespace

ClosedLoopResult receding_horizon(const LiftedModel& model, const PlantModel& plant,
                                  const Schedule& sched, const Fault& fault,
                                  const MpcSettings& settings) {
  check_settings(settings);
  if (model.n != plant.n || model.m != plant.m || model.h != sched.h)
    throw ShapeError("receding_horizon: model dimensions do not match the plant and schedule");
  if (settings.u_max > plant.u_max)
    throw ArgumentError("receding_horizon: mpc.u_max exceeds the plant's actuator limit");

  ClosedLoopResult result;
  result.v_ref = settings.v_ref;
  const Vector z_ref = lift_reference(model, settings.v_ref);
  std::size_t failed_at = 0;

  ControlPolicy policy = [&](std::size_t k, const Trajectory& so_far) -> Vector {
    Vector applied(plant.m, 0.0);
    if (result.aborted) return applied;
    InstantDiagnostics diag;
    diag.instant = k;
    diag.horizon = sched.n_instants - k;
    diag.time = so_far.time(so_far.samples() - 1);
    try {
      const Vector z = lift(model, window_history(so_far, k + 1));
      const MpcProblem problem = make_problem(model, z, z_ref, diag.horizon, settings);
      const CondensedQp qp = condense(problem);
      const QpResult sol = solve_box_qp(qp, settings.qp);
      diag.converged = true;
      diag.iterations = sol.iterations;
      diag.residual = sol.residual;
      diag.lipschitz = sol.lipschitz;
      diag.cost = qp_cost(qp, sol.u);
      diag.u_normalized.assign(sol.u.begin(), sol.u.begin() + static_cast<std::ptrdiff_t>(plant.m));
      for (std::size_t l = 0; l < plant.m; ++l) {
        const double raw = model.scaler ? model.scaler->denormalize_control(diag.u_normalized[l])
                                        : diag.u_normalized[l];
        applied[l] = std::clamp(raw, settings.u_min, settings.u_max);
      }
      diag.u_applied = applied;
    } catch (const NonConvergenceError& e) {
      diag.residual = e.residual();
      diag.error = e.what();
      result.aborted = true;
      result.error = e.what();
      failed_at = k;
      std::fill(applied.begin(), applied.end(), 0.0);
    }
    result.diagnostics.push_back(diag);
    return applied;
  };

  result.trajectory = run_episode(plant, sched, fault, policy);
  if (result.aborted) {
    // Keep everything measured up to the failed instant.
    Trajectory& t = result.trajectory;
    const std::size_t samples = (failed_at + 1) * sched.h + 1;
    const std::size_t n = t.voltages.cols(), m = t.controls.cols();
    t.voltages = Matrix(samples, n, Vector(t.voltages.data(), t.voltages.data() + samples * n));
    t.controls = Matrix(failed_at + 1, m, Vector(t.controls.data(), t.controls.data() + (failed_at + 1) * m));
  }
  return result;
}

LiftedLoop lifted_closed_loop(const LiftedModel& model, const Vector& z0, const Vector& z_ref,
                              std::size_t n_instants, const MpcSettings& settings) {
  check_settings(settings);
  LiftedLoop out;
  out.applied = Matrix(n_instants, model.m);
  Vector z = z0;
  for (std::size_t k = 0; k < n_instants; ++k) {
    const CondensedQp qp = condense(make_problem(model, z, z_ref, n_instants - k, settings));
    const QpResult sol = solve_box_qp(qp, settings.qp);
    if (k == 0) out.plan = unstack(sol.u, model.m);
    const std::span<const double> u0(sol.u.data(), model.m);
    std::copy(u0.begin(), u0.end(), out.applied.row(k).begin());
    Vector next = matvec(model.a, z);
    const Vector bu = matvec(model.b, u0);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += bu[i];
    z = std::move(next);
  }
  return out;
}

std::string trajectory_to_csv(const Trajectory& traj) {
  const std::size_t n = traj.voltages.cols(), m = traj.controls.cols();
  std::string out = "time";
  for (std::size_t i = 0; i < n; ++i) out += ",v" + std::to_string(i);
  for (std::size_t l = 0; l < m; ++l) out += ",u" + std::to_string(l);
  out += '\n';
  for (std::size_t s = 0; s < traj.samples(); ++s) {
    std::string line = format_number(traj.time(s));
    for (std::size_t i = 0; i < n; ++i) append_csv_number(line, traj.voltages(s, i));
    if (traj.intervals() > 0) {
      const std::size_t k = std::min(s / traj.h, traj.intervals() - 1);
      for (std::size_t l = 0; l < m; ++l) append_csv_number(line, traj.controls(k, l));
    }
    out += line + '\n';
  }
  return out;
}

nlohmann::ordered_json diagnostics_to_json(const ClosedLoopResult& r) {
  nlohmann::ordered_json j;
  j["v_ref"] = r.v_ref;
  j["aborted"] = r.aborted;
  j["error"] = r.error;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const InstantDiagnostics& d : r.diagnostics) {
    nlohmann::ordered_json e;
    e["instant"] = d.instant;
    e["time"] = d.time;
    e["horizon"] = d.horizon;
    e["converged"] = d.converged;
    e["iterations"] = d.iterations;
    e["residual"] = d.residual;
    e["lipschitz"] = d.lipschitz;
    e["cost"] = d.cost;
    e["u_normalized"] = d.u_normalized;
    e["u_applied"] = d.u_applied;
    if (!d.error.empty()) e["error"] = d.error;
    list.push_back(e);
  }
  j["instants"] = list;
  return j;
}

}  // namespace kmpc
