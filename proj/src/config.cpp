#include "kmpc/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "kmpc/error.hpp"
#include "kmpc/serialization.hpp"

namespace kmpc {

using nlohmann::json;
using nlohmann::ordered_json;

PlantSetup default_setup() {
  PlantSetup s;
  s.plant = default_plant();
  s.schedule = Schedule::make(0.75, 3.0, 5);
  s.fault = Fault{{1, 2, 3}, 0.3};
  return s;
}

namespace {

// Collects violations while reading optional fields over a default.
class Reader {
 public:
  Reader(const json& j, std::string prefix, std::vector<std::string>& bad)
      : j_(j), prefix_(std::move(prefix)), bad_(bad) {}

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string name(const char* key) const { return prefix_ + key; }
  void fail(const std::string& what) { bad_.push_back(what); }

  template <class T>
  void get(const char* key, T& out) {
    if (!has(key)) return;
    try {
      const json& v = j_.at(key);
      if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
          fail(name(key) + " must be a nonnegative integer");
          return;
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) {
          fail(name(key) + " must be a number");
          return;
        }
      }
      out = v.get<T>();
    } catch (const json::exception&) {
      fail(name(key) + " has the wrong type");
    }
  }

  // Scalar broadcast to n entries or an explicit array.
  void vec(const char* key, Vector& out, std::size_t n) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (v.is_number()) {
      out.assign(n, v.get<double>());
    } else if (v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })) {
      out = v.get<Vector>();
    } else {
      fail(name(key) + " must be a number or an array of numbers");
    }
  }

  void matrix(const char* key, Matrix& out) {
    if (!has(key)) return;
    try {
      out = matrix_from_rows(j_.at(key));
    } catch (const Error& e) {
      fail(name(key) + ": " + e.what());
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::vector<std::string>& bad_;
};

void collect(std::vector<std::string>& bad, const std::function<void()>& validate) {
  try {
    validate();
  } catch (const ConfigError& e) {
    bad.insert(bad.end(), e.violations().begin(), e.violations().end());
  } catch (const Error& e) {
    bad.push_back(e.what());
  }
}

PlantSetup read_setup(const json& j, std::vector<std::string>& bad) {
  PlantSetup s = default_setup();
  if (!j.is_object()) {
    bad.push_back("plant config must be a JSON object");
    return s;
  }
  Reader r(j, "", bad);
  PlantModel& p = s.plant;
  const std::size_t n_before = p.n, m_before = p.m;
  r.get("n", p.n);
  r.get("m", p.m);
  // Changing dimensions invalidates the default vectors; require them then.
  const bool resized = p.n != n_before || p.m != m_before;
  for (const char* key : {"a", "b", "d", "W", "gamma"})
    if (resized && !r.has(key)) bad.push_back(std::string(key) + " is required when n or m differs from the default");
  r.vec("a", p.a, p.n);
  r.vec("b", p.b, p.n);
  r.vec("d", p.d, p.n);
  r.get("c", p.c);
  r.get("v_max", p.v_max);
  r.get("lambda", p.lambda);
  r.get("u_max", p.u_max);
  r.matrix("W", p.w);
  r.matrix("gamma", p.gamma);
  if (bad.empty()) collect(bad, [&] { p.validate(); });

  if (r.has("schedule")) {
    Reader sr(r.at("schedule"), "schedule.", bad);
    double ts = s.schedule.ts, tc = s.schedule.tc;
    std::size_t n_instants = s.schedule.n_instants;
    sr.get("Ts", ts);
    sr.get("Tc", tc);
    sr.get("n_instants", n_instants);
    collect(bad, [&] { s.schedule = Schedule::make(ts, tc, n_instants); });
  }
  if (r.has("fault")) {
    Reader fr(r.at("fault"), "fault.", bad);
    fr.get("affected", s.fault.affected);
    fr.get("depth", s.fault.depth);
  }
  if (s.fault.affected.empty()) bad.push_back("fault.affected must not be empty");
  for (std::size_t i : s.fault.affected)
    if (i >= p.n) bad.push_back("fault.affected index " + std::to_string(i) + " is out of range");
  if (!(s.fault.depth > 0.0 && s.fault.depth < 1.0)) bad.push_back("fault.depth must be in (0, 1)");
  return s;
}

ordered_json rows_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < m.rows(); ++r)
    rows.push_back(Vector(m.row(r).begin(), m.row(r).end()));
  return rows;
}

}  // namespace

PlantSetup plant_setup_from_json(const json& j) {
  std::vector<std::string> bad;
  PlantSetup s = read_setup(j, bad);
  if (!bad.empty()) throw ConfigError(bad);
  return s;
}

ordered_json plant_setup_to_json(const PlantSetup& s) {
  const PlantModel& p = s.plant;
  ordered_json j;
  j["n"] = p.n;
  j["m"] = p.m;
  j["a"] = p.a;
  j["b"] = p.b;
  j["c"] = p.c;
  j["v_max"] = p.v_max;
  j["W"] = rows_json(p.w);
  j["gamma"] = rows_json(p.gamma);
  j["d"] = p.d;
  j["lambda"] = p.lambda;
  j["u_max"] = p.u_max;
  j["schedule"] = {{"Ts", s.schedule.ts}, {"Tc", s.schedule.tc}, {"n_instants", s.schedule.n_instants}};
  j["fault"] = {{"affected", s.fault.affected}, {"depth", s.fault.depth}};
  return j;
}

std::uint64_t plant_digest(const PlantSetup& setup) {
  return fnv1a64(plant_setup_to_json(setup).dump());
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  std::vector<std::string> bad;
  RunConfig c;
  if (!j.is_object()) throw ConfigError({"run config must be a JSON object"});
  Reader r(j, "", bad);

  if (!r.has("seed")) bad.push_back("seed is required");
  r.get("seed", c.seed);

  if (r.has("plant") && r.has("plant_config")) bad.push_back("give either plant or plant_config, not both");
  if (r.has("plant")) {
    c.setup = read_setup(r.at("plant"), bad);
  } else if (r.has("plant_config")) {
    std::filesystem::path path;
    try {
      path = r.at("plant_config").get<std::string>();
    } catch (const json::exception&) {
      bad.push_back("plant_config must be a path string");
    }
    if (!path.empty()) {
      if (path.is_relative()) path = base_dir / path;
      if (!std::filesystem::exists(path)) {
        bad.push_back("plant_config " + path.string() + " does not exist");
      } else {
        try {
          c.setup = read_setup(json::parse(read_text(path)), bad);
        } catch (const json::exception& e) {
          bad.push_back("plant_config " + path.string() + ": " + e.what());
        }
      }
    }
  } else {
    c.setup = default_setup();
  }

  if (r.has("dataset")) {
    Reader d(r.at("dataset"), "dataset.", bad);
    d.get("n_loads", c.dataset.n_loads);
    d.get("split_ratio", c.dataset.split_ratio);
    d.get("v_ref", c.dataset.v_ref);
    d.get("load_lo", c.dataset.load_lo);
    d.get("load_hi", c.dataset.load_hi);
  }
  if (c.dataset.n_loads < 1) bad.push_back("dataset.n_loads must be >= 1");
  if (!(c.dataset.split_ratio > 0.0 && c.dataset.split_ratio < 1.0))
    bad.push_back("dataset.split_ratio must be in (0, 1)");
  if (!(c.dataset.load_lo > 0.0 && c.dataset.load_lo <= c.dataset.load_hi))
    bad.push_back("dataset.load_lo must be > 0 and <= dataset.load_hi");

  c.kdnn.n = c.setup.plant.n;
  c.kdnn.m = c.setup.plant.m;
  c.kdnn.h = c.setup.schedule.h;
  c.kdnn.seed = c.seed;
  c.train.seed = c.seed;
  if (r.has("kdnn")) {
    Reader k(r.at("kdnn"), "kdnn.", bad);
    k.get("lifted_dim", c.kdnn.lifted_dim);
    k.get("hidden", c.kdnn.hidden);
    k.get("batch_size", c.train.batch_size);
    k.get("learning_rate", c.train.adam.learning_rate);
    k.get("max_epochs", c.train.max_epochs);
    k.get("patience", c.train.patience);
  }
  collect(bad, [&] { c.kdnn.validate(); });
  collect(bad, [&] { c.train.validate(); });

  if (r.has("edmd")) {
    Reader e(r.at("edmd"), "edmd.", bad);
    e.get("dictionary", c.edmd.dictionary);
    e.get("ridge", c.edmd.ridge);
  }
  if (!(c.edmd.ridge >= 0.0)) bad.push_back("edmd.ridge must be >= 0");

  c.mpc.u_max = c.setup.plant.u_max;
  c.mpc.v_ref = c.dataset.v_ref;
  if (r.has("mpc")) {
    Reader m(r.at("mpc"), "mpc.", bad);
    m.get("q_weight", c.mpc.q_weight);
    m.get("r_weight", c.mpc.r_weight);
    m.get("u_min", c.mpc.u_min);
    m.get("u_max", c.mpc.u_max);
    m.get("tol", c.mpc.qp.tol);
    m.get("max_iter", c.mpc.qp.max_iter);
  }
  if (!(c.mpc.q_weight >= 0.0)) bad.push_back("mpc.q_weight must be >= 0");
  if (!(c.mpc.r_weight >= 0.0)) bad.push_back("mpc.r_weight must be >= 0");
  if (!(c.mpc.u_min >= 0.0 && c.mpc.u_min <= c.mpc.u_max))
    bad.push_back("mpc.u_min must be in [0, mpc.u_max]");
  if (!(c.mpc.u_max <= c.setup.plant.u_max)) bad.push_back("mpc.u_max must not exceed plant u_max");
  if (!(c.mpc.qp.tol > 0.0)) bad.push_back("mpc.tol must be > 0");
  if (c.mpc.qp.max_iter < 1) bad.push_back("mpc.max_iter must be >= 1");

  c.vvc.u_max = c.mpc.u_max;
  c.vvc.v_ref = c.mpc.v_ref;
  if (r.has("eval")) {
    Reader e(r.at("eval"), "eval.", bad);
    e.get("v_db", c.vvc.v_db);
    e.get("k_v", c.vvc.k_v);
    e.get("cases", c.cases);
    e.get("monitored", c.monitored);
  }
  collect(bad, [&] { c.vvc.validate(); });
  if (c.cases < 1) bad.push_back("eval.cases must be >= 1");
  for (std::size_t i : c.monitored)
    if (i >= c.setup.plant.n) bad.push_back("eval.monitored index " + std::to_string(i) + " is out of range");

  for (const auto& [key, value] : j.items()) {
    static const char* known[] = {"seed", "plant", "plant_config", "dataset", "kdnn",
                                  "edmd", "mpc",   "eval",         "comment"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      bad.push_back("unknown key '" + key + "'");
  }
  if (!bad.empty()) throw ConfigError(bad);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError({"config " + path.string() + " does not exist"});
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

}  // namespace kmpc
