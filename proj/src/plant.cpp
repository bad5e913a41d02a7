#include "kmpc/plant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kmpc/error.hpp"

namespace kmpc {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void PlantModel::validate() const {
  std::vector<std::string> bad;
  if (n == 0) bad.push_back("n must be >= 1");
  if (a.size() != n) bad.push_back("a must have n entries");
  if (b.size() != n) bad.push_back("b must have n entries");
  if (d.size() != n) bad.push_back("d must have n entries");
  if (w.rows() != n || w.cols() != n) bad.push_back("W must be n x n");
  if (gamma.rows() != n || gamma.cols() != m) bad.push_back("gamma must be n x m");
  if (!bad.empty()) throw ConfigError(bad);

  for (std::size_t i = 0; i < n; ++i) {
    if (!(a[i] > 0.0)) bad.push_back("a[" + std::to_string(i) + "] must be > 0");
    if (!(b[i] >= 0.0)) bad.push_back("b[" + std::to_string(i) + "] must be >= 0");
    if (!(d[i] >= 0.0 && d[i] <= 1.0))
      bad.push_back("d[" + std::to_string(i) + "] must be in [0, 1]");
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(w(i, j) >= 0.0)) bad.push_back("W must be nonnegative");
      row += w(i, j);
    }
    if (w(i, i) != 0.0) bad.push_back("W[" + std::to_string(i) + "][" + std::to_string(i) + "] must be 0");
    if (n > 1 && std::abs(row - 1.0) > 1e-12)
      bad.push_back("row " + std::to_string(i) + " of W must sum to 1");
    for (std::size_t l = 0; l < m; ++l)
      if (!(gamma(i, l) >= 0.0)) bad.push_back("gamma entries must be >= 0");
  }
  if (!(c >= 0.0)) bad.push_back("c must be >= 0");
  if (!(v_max > 1.0)) bad.push_back("v_max must be > 1");
  if (!(u_max >= 0.0)) bad.push_back("u_max must be >= 0");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) bad.push_back("lambda must be > 0");
  if (bad.empty()) {
    for (double v : equilibrium())
      if (!(v > 0.0 && v <= 1.0)) {
        bad.push_back("equilibrium 1 - 0.3 lambda d must lie in (0, 1]");
        break;
      }
  }
  if (!bad.empty()) {
    bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
    throw ConfigError(bad);
  }
}

Vector PlantModel::equilibrium() const {
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 - 0.3 * lambda * d[i];
  return v;
}

PlantModel PlantModel::with_load(double load_factor) const {
  PlantModel p = *this;
  p.lambda = load_factor;
  return p;
}

PlantModel default_plant() {
  PlantModel p;
  p.n = 6;
  p.m = 3;
  p.a.assign(p.n, 2.0);
  p.b.assign(p.n, 5.0);
  p.c = 1.0;
  p.w = Matrix(p.n, p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    p.w(i, (i + 1) % p.n) = 0.5;
    p.w(i, (i + p.n - 1) % p.n) = 0.5;
  }
  p.gamma = Matrix(p.n, p.m);
  const std::size_t control_buses[] = {0, 2, 4};
  for (std::size_t l = 0; l < p.m; ++l) p.gamma(control_buses[l], l) = 8.0;
  p.v_max = 1.1;
  p.d = {0.2, 0.25, 0.3, 0.3, 0.25, 0.2};
  p.lambda = 1.0;
  p.u_max = 0.25;
  return p;
}

Schedule Schedule::make(double ts, double tc, std::size_t n_instants) {
  Schedule s;
  s.ts = ts;
  s.tc = tc;
  s.n_instants = n_instants;
  s.h = (ts > 0.0 && std::isfinite(tc / ts))
            ? static_cast<std::size_t>(std::llround(tc / ts))
            : 0;
  s.validate();
  return s;
}

void Schedule::validate() const {
  std::vector<std::string> bad;
  if (!(ts > 0.0)) bad.push_back("schedule.Ts must be > 0");
  if (!(tc > 0.0)) bad.push_back("schedule.Tc must be > 0");
  if (h < 1) bad.push_back("schedule: H = Tc/Ts must be >= 1");
  else if (std::abs(static_cast<double>(h) * ts - tc) > 1e-9 * tc)
    bad.push_back("schedule.Tc must be an integer multiple of schedule.Ts");
  if (n_instants < 1) bad.push_back("schedule.n_instants must be >= 1");
  if (!bad.empty()) throw ConfigError(bad);
}

Vector vector_field(const PlantModel& p, std::span<const double> v,
                    std::span<const double> u) {
  const Vector vs = p.equilibrium();
  Vector f(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    const double e = vs[i] - v[i];
    double coupling = 0.0;
    for (std::size_t j = 0; j < p.n; ++j)
      coupling += p.w(i, j) * ((v[j] - vs[j]) - (v[i] - vs[i]));
    double injection = 0.0;
    for (std::size_t l = 0; l < p.m; ++l) injection += p.gamma(i, l) * u[l];
    f[i] = p.a[i] * e + p.b[i] * e * e * e + p.c * coupling +
           injection * (p.v_max - v[i]);
  }
  return f;
}

PlantState step(const PlantModel& p, const PlantState& state,
                std::span<const double> u, double dt, int substeps) {
  if (!(dt > 0.0)) throw ArgumentError("step: dt must be > 0");
  if (substeps < 1) throw ArgumentError("step: substeps must be >= 1");
  if (state.v.size() != p.n) throw ShapeError("step: state has wrong length");
  if (u.size() != p.m) throw ShapeError("step: control has wrong length");
  if (!all_finite(state.v) || !std::isfinite(state.t))
    throw IntegrationError("step: non-finite state");
  if (!all_finite(p.a) || !all_finite(p.b) || !all_finite(p.d) ||
      !all_finite(p.gamma.values()) || !all_finite(p.w.values()) ||
      !std::isfinite(p.c) || !std::isfinite(p.v_max) || !std::isfinite(p.lambda))
    throw IntegrationError("step: non-finite plant parameters");
  for (double ul : u) {
    if (!std::isfinite(ul)) throw IntegrationError("step: non-finite control");
    if (ul < 0.0 || ul > p.u_max)
      throw ArgumentError("step: control " + std::to_string(ul) +
                          " outside [0, u_max]");
  }

  const double hstep = dt / substeps;
  Vector v = state.v;
  Vector tmp(p.n);
  for (int s = 0; s < substeps; ++s) {
    const Vector k1 = vector_field(p, v, u);
    for (std::size_t i = 0; i < p.n; ++i) tmp[i] = v[i] + 0.5 * hstep * k1[i];
    const Vector k2 = vector_field(p, tmp, u);
    for (std::size_t i = 0; i < p.n; ++i) tmp[i] = v[i] + 0.5 * hstep * k2[i];
    const Vector k3 = vector_field(p, tmp, u);
    for (std::size_t i = 0; i < p.n; ++i) tmp[i] = v[i] + hstep * k3[i];
    const Vector k4 = vector_field(p, tmp, u);
    for (std::size_t i = 0; i < p.n; ++i) {
      v[i] += hstep / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      v[i] = std::clamp(v[i], 0.0, p.v_max);
    }
    if (!all_finite(v)) throw IntegrationError("step: integration diverged");
  }
  return PlantState{std::move(v), state.t + dt};
}

PlantState apply_fault(const PlantState& state,
                       std::span<const std::size_t> affected, double depth) {
  if (affected.empty()) throw ArgumentError("apply_fault: affected set is empty");
  if (!(depth > 0.0 && depth < 1.0))
    throw ArgumentError("apply_fault: depth must be in (0, 1)");
  PlantState out = state;
  for (std::size_t i : affected) {
    if (i >= out.v.size())
      throw IndexError("apply_fault: bus " + std::to_string(i) + " out of range");
  }
  for (std::size_t i : affected) out.v[i] = std::max(state.v[i] - depth, 0.05);
  return out;
}

Trajectory rollout(const PlantModel& p, const PlantState& init,
                   const ControlPolicy& policy, const Schedule& sched) {
  sched.validate();
  const std::size_t total = sched.n_instants * sched.h + 1;
  Trajectory traj;
  traj.ts = sched.ts;
  traj.h = sched.h;
  traj.voltages = Matrix(total, p.n);
  traj.controls = Matrix(sched.n_instants, p.m);

  // Views handed to the policy grow as the simulation advances.
  Trajectory so_far;
  so_far.ts = sched.ts;
  so_far.h = sched.h;

  PlantState state = init;
  std::copy(state.v.begin(), state.v.end(), traj.voltages.row(0).begin());
  std::size_t sample = 0;
  for (std::size_t k = 0; k < sched.n_instants; ++k) {
    so_far.voltages = Matrix(sample + 1, p.n,
                             std::vector<double>(traj.voltages.data(),
                                                 traj.voltages.data() + (sample + 1) * p.n));
    so_far.controls = Matrix(k, p.m,
                             std::vector<double>(traj.controls.data(),
                                                 traj.controls.data() + k * p.m));
    const Vector u = policy(k, so_far);
    if (u.size() != p.m) throw ShapeError("rollout: policy returned wrong control length");
    std::copy(u.begin(), u.end(), traj.controls.row(k).begin());
    for (std::size_t j = 0; j < sched.h; ++j) {
      state = step(p, state, u, sched.ts);
      ++sample;
      std::copy(state.v.begin(), state.v.end(), traj.voltages.row(sample).begin());
    }
  }
  return traj;
}

Trajectory run_episode(const PlantModel& p, const Schedule& sched,
                       const Fault& fault, const ControlPolicy& policy) {
  PlantState init{p.equilibrium(), 0.0};
  init = apply_fault(init, fault.affected, fault.depth);
  Schedule extended = sched;
  extended.n_instants = sched.n_instants + 1;
  const Vector zeros(p.m, 0.0);
  ControlPolicy wrapped = [&](std::size_t k, const Trajectory& so_far) -> Vector {
    if (k == 0) return zeros;
    return policy(k - 1, so_far);
  };
  return rollout(p, init, wrapped, extended);
}

ControlPolicy zero_policy(std::size_t m) {
  return [m](std::size_t, const Trajectory&) { return Vector(m, 0.0); };
}

ControlPolicy constant_policy(Vector u) {
  return [u = std::move(u)](std::size_t, const Trajectory&) { return u; };
}

}  // namespace kmpc
