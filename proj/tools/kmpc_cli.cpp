// kmpc: command-line front end for the Koopman MPC pipeline.
//
//   kmpc gen-data  --config C --out DIR [--seed S]
//   kmpc train     --data DIR --config C --out DIR
//   kmpc fit-edmd  --data DIR --out DIR [--dict SPEC] [--ridge L] [--config C]
//   kmpc run-mpc   --model M --config C --out DIR [--load F]
//   kmpc compare   --model M --config C --out DIR [--cases N] [--seed S]
//
// Failures print one JSON object on stderr and exit nonzero.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "kmpc/config.hpp"
#include "kmpc/dataset.hpp"
#include "kmpc/edmd.hpp"
#include "kmpc/error.hpp"
#include "kmpc/eval.hpp"
#include "kmpc/kdnn.hpp"
#include "kmpc/lifted_model.hpp"
#include "kmpc/mpc.hpp"
#include "kmpc/nn/metrics.hpp"
#include "kmpc/serialization.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace kmpc;

namespace {

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ArgumentError("cannot create output directory " + dir.string() + ": " + ec.message());
}

ordered_json evaluation_json(const Evaluation& e) {
  return {{"mse_next", e.mse_next}, {"mse_recon", e.mse_recon}, {"mae_next", e.mae_next},
          {"mae_recon", e.mae_recon}, {"r2_next", e.r2_next},   {"r2_recon", e.r2_recon}};
}

// Scaled copy of the dataset; the scaler is fitted when the files carry none.
Dataset with_scaler(Dataset ds, double v_ref) {
  if (!ds.scaler) ds.scaler = fit_scaler(ds, v_ref);
  return ds;
}

int cmd_gen_data(const fs::path& config_path, const fs::path& out, std::optional<std::uint64_t> seed) {
  RunConfig cfg = load_run_config(config_path);
  if (seed) cfg.seed = *seed;
  GenerateOptions opts;
  opts.load_lo = cfg.dataset.load_lo;
  opts.load_hi = cfg.dataset.load_hi;
  opts.plant_digest = plant_digest(cfg.setup);
  Dataset ds = generate(cfg.setup.plant, cfg.setup.schedule, cfg.setup.fault, cfg.dataset.n_loads,
                        cfg.seed, opts);
  ds.scaler = fit_scaler(ds, cfg.dataset.v_ref, 0.0, cfg.setup.plant.u_max);
  ensure_dir(out);
  save(ds, out);
  std::cout << "wrote " << ds.size() << " samples to " << out.string() << "\n";
  return 0;
}

int cmd_train(const fs::path& data, const fs::path& config_path, const fs::path& out) {
  const RunConfig cfg = load_run_config(config_path);
  const Dataset ds = with_scaler(load(data), cfg.dataset.v_ref);
  if (ds.n != cfg.kdnn.n || ds.h != cfg.kdnn.h || ds.m != cfg.kdnn.m)
    throw ShapeError("train: dataset dimensions do not match the config's plant and schedule");
  const auto [train_ds, test_ds] = split(ds, cfg.dataset.split_ratio, ds.meta.seed);
  const NormalizedSet train_set = normalize(train_ds, *ds.scaler);
  const NormalizedSet test_set = normalize(test_ds, *ds.scaler);

  TrainResult result = train(cfg.kdnn, train_set, test_set, cfg.train);
  ensure_dir(out);
  save_checkpoint(out / "checkpoint.json", cfg.kdnn, result.params, ds.scaler);
  save_lifted_model(extract(result.params, cfg.kdnn, *ds.scaler), out / "lifted_model.json");
  write_text(out / "training_history.csv", history_to_csv(result.history));

  ordered_json metrics;
  metrics["train_samples"] = train_set.count;
  metrics["test_samples"] = test_set.count;
  metrics["epochs"] = result.history.epochs.size();
  metrics["best_epoch"] = result.history.best_epoch;
  metrics["stopped_early"] = result.history.stopped_early;
  metrics["train"] = evaluation_json(evaluate(result.params, train_set));
  if (test_set.count > 0) metrics["test"] = evaluation_json(evaluate(result.params, test_set));
  write_json(out / "metrics.json", metrics);
  std::cout << "trained " << result.history.epochs.size() << " epochs (best "
            << result.history.best_epoch << ")\n";
  return 0;
}

int cmd_fit_edmd(const fs::path& data, std::optional<std::string> dict_opt, std::optional<double> ridge_opt,
                 const fs::path& config_path, const fs::path& out) {
  // Flags win over the config's edmd section, which wins over the built-in defaults.
  EdmdParams params;
  DatasetParams dparams;
  if (!config_path.empty()) {
    const RunConfig cfg = load_run_config(config_path);
    params = cfg.edmd;
    dparams = cfg.dataset;
  }
  const std::string dict_spec = dict_opt.value_or(params.dictionary);
  const double ridge = ridge_opt.value_or(params.ridge);
  const Dataset ds = with_scaler(load(data), dparams.v_ref);
  const auto [train_ds, test_ds] = split(ds, dparams.split_ratio, ds.meta.seed);
  const Dictionary dict = make_dictionary(dict_spec, train_ds);
  const EdmdModel model = fit(train_ds, dict, ridge);
  ensure_dir(out);
  save_lifted_model(to_lifted_model(model), out / "lifted_model.json");

  // One-step prediction quality on the held-out split, in normalized units.
  ordered_json metrics;
  metrics["dictionary"] = dict.describe();
  metrics["lifted_dim"] = dict.output_dim();
  metrics["ridge"] = ridge;
  metrics["residual"] = model.residual;
  metrics["projection_residual"] = model.projection_residual;
  if (test_ds.size() > 0) {
    Vector truth_next, pred_next, truth_recon, pred_recon;
    for (const Sample& s : test_ds.samples) {
      const auto pred = predict(model, s.v_k, Matrix(1, ds.m, s.u_k));
      auto append = [&](Vector& dst, const HistoryMatrix& raw) {
        const HistoryMatrix scaled = normalize(raw, *ds.scaler);
        dst.insert(dst.end(), scaled.values().begin(), scaled.values().end());
      };
      append(truth_next, s.v_next);
      append(pred_next, pred[1]);
      append(truth_recon, s.v_k);
      append(pred_recon, pred[0]);
    }
    metrics["test"] = {{"mse_next", nn::mse(truth_next, pred_next)},
                       {"mae_next", nn::mae(truth_next, pred_next)},
                       {"r2_next", nn::r2(truth_next, pred_next)},
                       {"r2_recon", nn::r2(truth_recon, pred_recon)}};
  }
  write_json(out / "metrics.json", metrics);
  std::cout << "fitted EDMD (" << dict.describe() << ", N=" << dict.output_dim() << ")\n";
  return 0;
}

int cmd_run_mpc(const fs::path& model_path, const fs::path& config_path, const fs::path& out,
                std::optional<double> load) {
  const RunConfig cfg = load_run_config(config_path);
  const LiftedModel model = load_lifted_model(model_path);
  PlantModel plant = cfg.setup.plant;
  if (load) plant = plant.with_load(*load);
  const ClosedLoopResult result =
      receding_horizon(model, plant, cfg.setup.schedule, cfg.setup.fault, cfg.mpc);
  ensure_dir(out);
  write_text(out / "closed_loop.csv", trajectory_to_csv(result.trajectory));
  ordered_json diag = diagnostics_to_json(result);
  std::vector<std::size_t> monitored = cfg.monitored;
  if (monitored.empty())
    for (std::size_t i = 0; i < plant.n; ++i) monitored.push_back(i);
  diag["load_factor"] = plant.lambda;
  diag["performance_index"] = performance_index(result.trajectory, cfg.mpc.v_ref, monitored);
  diag["cumulative_control"] = cumulative_control(result.trajectory);
  write_json(out / "diagnostics.json", diag);
  if (result.aborted) throw NonConvergenceError("run-mpc: " + result.error, 0.0);
  std::cout << "closed loop J = " << format_number(diag["performance_index"].get<double>()) << "\n";
  return 0;
}

int cmd_compare(const fs::path& model_path, const fs::path& config_path, const fs::path& out,
                std::optional<std::size_t> cases, std::optional<std::uint64_t> seed) {
  const RunConfig cfg = load_run_config(config_path);
  const LiftedModel model = load_lifted_model(model_path);
  CompareSettings s;
  s.n_cases = cases.value_or(cfg.cases);
  s.seed = seed.value_or(cfg.seed);
  s.load_lo = cfg.dataset.load_lo;
  s.load_hi = cfg.dataset.load_hi;
  s.monitored = cfg.monitored;
  s.vvc = cfg.vvc;
  s.mpc = cfg.mpc;
  const ComparisonReport report = compare(model, cfg.setup.plant, cfg.setup.schedule, cfg.setup.fault, s);
  ensure_dir(out);
  write_text(out / "report.csv", report_to_csv(report));
  write_json(out / "report.json", report_to_json(report));
  std::cout << "win fraction " << format_number(report.win_fraction) << " over " << s.n_cases
            << " cases\n";
  return 0;
}

void print_error(const char* kind, const std::string& message,
                 const std::vector<std::string>& violations = {}) {
  ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  if (!violations.empty()) j["violations"] = violations;
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Koopman-lifted MPC for post-fault voltage control"};
  app.require_subcommand(1);

  fs::path config, out, data, model;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> cases;
  std::optional<double> load;
  std::optional<std::string> dict;
  std::optional<double> ridge;

  auto* gen = app.add_subcommand("gen-data", "simulate rollouts and write a dataset");
  gen->add_option("--config", config, "run config JSON")->required();
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--seed", seed, "master seed (overrides the config)");

  auto* tr = app.add_subcommand("train", "train the Koopman network");
  tr->add_option("--data", data, "dataset directory")->required();
  tr->add_option("--config", config, "run config JSON")->required();
  tr->add_option("--out", out, "output directory")->required();

  auto* ed = app.add_subcommand("fit-edmd", "fit an EDMD baseline");
  ed->add_option("--data", data, "dataset directory")->required();
  ed->add_option("--dict", dict, "identity | poly:<degree> | rbf:<count>:<width>");
  ed->add_option("--ridge", ridge, "ridge parameter (>= 0)");
  ed->add_option("--config", config, "run config JSON supplying edmd defaults");
  ed->add_option("--out", out, "output directory")->required();

  auto* mpc = app.add_subcommand("run-mpc", "run one closed-loop MPC episode");
  mpc->add_option("--model", model, "lifted_model.json")->required();
  mpc->add_option("--config", config, "run config JSON")->required();
  mpc->add_option("--out", out, "output directory")->required();
  mpc->add_option("--load", load, "load factor (defaults to the plant's lambda)");

  auto* cmp = app.add_subcommand("compare", "compare no-control, VVC and MPC over load cases");
  cmp->add_option("--model", model, "lifted_model.json")->required();
  cmp->add_option("--config", config, "run config JSON")->required();
  cmp->add_option("--out", out, "output directory")->required();
  cmp->add_option("--cases", cases, "number of load cases (overrides the config)");
  cmp->add_option("--seed", seed, "case seed (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(config, out, seed);
    if (*tr) return cmd_train(data, config, out);
    if (*ed) return cmd_fit_edmd(data, dict, ridge, config, out);
    if (*mpc) return cmd_run_mpc(model, config, out, load);
    if (*cmp) return cmd_compare(model, config, out, cases, seed);
  } catch (const ConfigError& e) {
    print_error(e.kind(), e.what(), e.violations());
    return 1;
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 1;
  }
  return 1;
}
