#include "kmpc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "kmpc/error.hpp"
#include "kmpc/rng.hpp"
#include "kmpc/serialization.hpp"

namespace kmpc {

void Scaler::validate() const {
  if (!(v_hi > v_lo)) throw ScalerError("scaler: degenerate voltage range (v_hi <= v_lo)");
  if (!(u_hi > u_lo)) throw ScalerError("scaler: degenerate control range (u_hi <= u_lo)");
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.v_k.rows() != n || s.v_k.cols() != h || s.v_next.rows() != n ||
        s.v_next.cols() != h || s.u_k.size() != m) {
      throw ShapeError("dataset: sample " + std::to_string(i) +
                       " is inconsistent with n=" + std::to_string(n) +
                       ", H=" + std::to_string(h) + ", m=" + std::to_string(m));
    }
  }
}

HistoryMatrix window_history(const Trajectory& traj, std::size_t k) {
  if (k < 1 || k > traj.intervals())
    throw IndexError("window_history: instant " + std::to_string(k) +
                     " outside [1, " + std::to_string(traj.intervals()) + "]");
  const std::size_t h = traj.h;
  if (k * h >= traj.samples())
    throw IndexError("window_history: trajectory too short for instant " + std::to_string(k));
  const std::size_t n = traj.voltages.cols();
  HistoryMatrix w(n, h);
  for (std::size_t j = 0; j < h; ++j) {
    const std::size_t s = (k - 1) * h + 1 + j;
    for (std::size_t i = 0; i < n; ++i) w(i, j) = traj.voltages(s, i);
  }
  return w;
}

double load_factor_for(std::uint64_t seed, std::size_t load_index, double lo, double hi) {
  Rng rng(mix_seed(seed, load_index, 0));
  return rng.uniform(lo, hi);
}

Dataset generate(const PlantModel& plant, const Schedule& sched, const Fault& fault,
                 std::size_t n_loads, std::uint64_t seed, const GenerateOptions& options) {
  if (n_loads < 1) throw ArgumentError("generate: n_loads must be >= 1");
  plant.validate();
  sched.validate();
  const std::size_t n_policies = options.mix == PolicyMix::standard ? 3 : 1;

  Dataset ds;
  ds.n = plant.n;
  ds.h = sched.h;
  ds.m = plant.m;
  ds.meta.seed = seed;
  ds.meta.n_loads = n_loads;
  ds.meta.plant_digest = options.plant_digest;
  ds.meta.policy_mix = options.mix == PolicyMix::standard ? "zero,full,random" : "zero";
  ds.samples.reserve(n_loads * n_policies * sched.n_instants);

  for (std::size_t li = 0; li < n_loads; ++li) {
    const PlantModel loaded =
        plant.with_load(load_factor_for(seed, li, options.load_lo, options.load_hi));
    for (std::size_t pi = 0; pi < n_policies; ++pi) {
      ControlPolicy policy;
      if (pi == 0) {
        policy = zero_policy(plant.m);
      } else if (pi == 1) {
        policy = constant_policy(Vector(plant.m, plant.u_max));
      } else {
        auto rng = std::make_shared<Rng>(mix_seed(seed, li, pi));
        policy = [rng, &plant](std::size_t, const Trajectory&) {
          Vector u(plant.m);
          for (double& x : u) x = rng->uniform(0.0, plant.u_max);
          return u;
        };
      }
      const Trajectory traj = run_episode(loaded, sched, fault, policy);
      for (std::size_t k = 1; k <= sched.n_instants; ++k) {
        Sample s;
        s.v_k = window_history(traj, k);
        const auto urow = traj.controls.row(k);
        s.u_k.assign(urow.begin(), urow.end());
        s.v_next = window_history(traj, k + 1);
        ds.samples.push_back(std::move(s));
      }
    }
  }
  return ds;
}

Scaler fit_scaler(const Dataset& ds, double v_ref, double u_lo, double u_hi) {
  if (ds.samples.empty()) throw ScalerError("fit_scaler: dataset is empty");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Sample& s : ds.samples) {
    for (double x : s.v_k.values()) {
      lo = std::min(lo, x - v_ref);
      hi = std::max(hi, x - v_ref);
    }
    for (double x : s.v_next.values()) {
      lo = std::min(lo, x - v_ref);
      hi = std::max(hi, x - v_ref);
    }
  }
  Scaler sc{v_ref, lo, hi, u_lo, u_hi};
  sc.validate();
  return sc;
}

HistoryMatrix normalize(const HistoryMatrix& v, const Scaler& scaler) {
  HistoryMatrix out = v;
  for (double& x : out.values()) x = scaler.normalize_voltage(x);
  return out;
}

HistoryMatrix denormalize(const HistoryMatrix& v, const Scaler& scaler) {
  HistoryMatrix out = v;
  for (double& x : out.values()) x = scaler.denormalize_voltage(x);
  return out;
}

NormalizedSet normalize(const Dataset& ds, const Scaler& scaler) {
  scaler.validate();
  ds.validate();
  NormalizedSet out;
  out.n = ds.n;
  out.h = ds.h;
  out.m = ds.m;
  out.count = ds.samples.size();
  const std::size_t w = ds.n * ds.h;
  out.v_k.resize(out.count * w);
  out.v_next.resize(out.count * w);
  out.u.resize(out.count * ds.m);
  for (std::size_t i = 0; i < out.count; ++i) {
    const Sample& s = ds.samples[i];
    for (std::size_t j = 0; j < w; ++j) {
      out.v_k[i * w + j] = scaler.normalize_voltage(s.v_k.data()[j]);
      out.v_next[i * w + j] = scaler.normalize_voltage(s.v_next.data()[j]);
    }
    for (std::size_t l = 0; l < ds.m; ++l)
      out.u[i * ds.m + l] = scaler.normalize_control(s.u_k[l]);
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ArgumentError("split: ratio must be in (0, 1)");
  if (ds.samples.empty()) throw ArgumentError("split: dataset is empty");
  const std::size_t total = ds.samples.size();
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 0x53504C4954ULL, 0));
  for (std::size_t i = total; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  const auto n_first =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(total)));

  Dataset first, second;
  for (Dataset* d : {&first, &second}) {
    d->n = ds.n;
    d->h = ds.h;
    d->m = ds.m;
    d->scaler = ds.scaler;
    d->meta = ds.meta;
  }
  first.samples.reserve(n_first);
  second.samples.reserve(total - n_first);
  for (std::size_t i = 0; i < total; ++i)
    (i < n_first ? first : second).samples.push_back(ds.samples[idx[i]]);
  return {std::move(first), std::move(second)};
}

// --- persistence -----------------------------------------------------------

namespace {

constexpr const char* kManifest = "dataset.json";
constexpr const char* kSamples = "samples.csv";

std::string csv_header(std::size_t n, std::size_t h, std::size_t m) {
  std::string out;
  auto add = [&out](const std::string& s) {
    if (!out.empty()) out += ',';
    out += s;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < h; ++j)
      add("v_k[" + std::to_string(i) + "][" + std::to_string(j) + "]");
  for (std::size_t l = 0; l < m; ++l) add("u_k[" + std::to_string(l) + "]");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < h; ++j)
      add("v_next[" + std::to_string(i) + "][" + std::to_string(j) + "]");
  return out;
}

}  // namespace

void save(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["format"] = "kmpc-dataset-v1";
  manifest["n"] = ds.n;
  manifest["m"] = ds.m;
  manifest["H"] = ds.h;
  manifest["n_samples"] = ds.samples.size();
  manifest["n_loads"] = ds.meta.n_loads;
  manifest["seed"] = ds.meta.seed;
  manifest["plant_digest"] = hex64(ds.meta.plant_digest);
  manifest["policy_mix"] = ds.meta.policy_mix;
  manifest["scaler"] = ds.scaler ? scaler_to_json(*ds.scaler) : nlohmann::ordered_json(nullptr);
  manifest["samples_file"] = kSamples;
  manifest["columns"] = "v_k row-major (n*H), u_k (m), v_next row-major (n*H)";
  write_text(dir / kManifest, manifest.dump(2) + "\n");

  std::string body = csv_header(ds.n, ds.h, ds.m);
  body += '\n';
  for (const Sample& s : ds.samples) {
    std::string line;
    for (double x : s.v_k.values()) append_csv_number(line, x);
    for (double x : s.u_k) append_csv_number(line, x);
    for (double x : s.v_next.values()) append_csv_number(line, x);
    body += line;
    body += '\n';
  }
  write_text(dir / kSamples, body);
}

Dataset load(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(dir / kManifest));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dataset manifest: ") + e.what());
  }
  Dataset ds;
  std::size_t expected_rows = 0;
  std::string samples_file = kSamples;
  try {
    ds.n = manifest.at("n").get<std::size_t>();
    ds.m = manifest.at("m").get<std::size_t>();
    ds.h = manifest.at("H").get<std::size_t>();
    expected_rows = manifest.at("n_samples").get<std::size_t>();
    ds.meta.n_loads = manifest.value("n_loads", std::size_t{0});
    ds.meta.seed = manifest.value("seed", std::uint64_t{0});
    ds.meta.plant_digest = parse_hex64(manifest.value("plant_digest", std::string("0")));
    ds.meta.policy_mix = manifest.value("policy_mix", std::string());
    if (manifest.contains("scaler") && !manifest["scaler"].is_null())
      ds.scaler = scaler_from_json(manifest["scaler"]);
    samples_file = manifest.value("samples_file", std::string(kSamples));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dataset manifest: ") + e.what());
  }

  const std::size_t w = ds.n * ds.h;
  const std::size_t width = 2 * w + ds.m;
  std::istringstream in(read_text(dir / samples_file));
  std::string line;
  if (!std::getline(in, line)) throw ParseError("samples.csv: missing header");
  if (line != csv_header(ds.n, ds.h, ds.m))
    throw ParseError("samples.csv: header does not match manifest (n=" +
                     std::to_string(ds.n) + ", H=" + std::to_string(ds.h) +
                     ", m=" + std::to_string(ds.m) + ")");
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const Vector values = parse_csv_numbers(line);
    if (values.size() != width)
      throw ParseError("samples.csv row " + std::to_string(row) + ": expected " +
                       std::to_string(width) + " values, found " +
                       std::to_string(values.size()));
    Sample s;
    s.v_k = Matrix(ds.n, ds.h, Vector(values.begin(), values.begin() + w));
    s.u_k.assign(values.begin() + w, values.begin() + w + ds.m);
    s.v_next = Matrix(ds.n, ds.h, Vector(values.begin() + w + ds.m, values.end()));
    ds.samples.push_back(std::move(s));
  }
  if (row != expected_rows)
    throw ParseError("samples.csv: manifest declares " + std::to_string(expected_rows) +
                     " samples, file has " + std::to_string(row));
  return ds;
}

}  // namespace kmpc
