// arzctl: kernels, datasets, training and closed-loop experiments for the ARZ
// outlet-control problem. Exit codes: 0 ok, 1 usage, 2 config, 3 numerics, 4 model/file IO.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "arz/bench.hpp"
#include "arz/errors.hpp"
#include "arz/grid.hpp"
#include "arz/kernel_solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace arz;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kNumerics = 3, kModelIo = 4 };

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

fs::path resolve(const ExperimentConfig& cfg, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : fs::path(cfg.out) / path;
}

ExperimentConfig load(const Globals& g) {
  ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.out) cfg.out = *g.out;
  cfg.controller.kernel_model = resolve(cfg, cfg.controller.kernel_model).string();
  cfg.controller.law_model = resolve(cfg, cfg.controller.law_model).string();
  cfg.dataset.dir = resolve(cfg, cfg.dataset.dir).string();
  cfg.training.model_out = resolve(cfg, cfg.training.model_out).string();
  cfg.eps.model = resolve(cfg, cfg.eps.model).string();
  fs::create_directories(cfg.out);
  return cfg;
}

void write_summary(const ExperimentConfig& cfg, const std::string& command, json results,
                   const std::vector<std::string>& outputs) {
  json j;
  j["command"] = command;
  j["config"] = serialize_config(cfg);
  j["config_hash"] = hex64(fnv1a64(serialize_config(cfg)));
  j["seed"] = cfg.seed;
  j["outputs"] = outputs;
  j["results"] = std::move(results);
  std::ofstream os(fs::path(cfg.out) / (command + "_summary.json"));
  if (!os) throw ModelIoError("cannot write summary manifest in " + cfg.out);
  os << j.dump(2) << '\n';
}

int cmd_solve_kernels(const Globals& g) {
  const ExperimentConfig cfg = load(g);
  const SimConfig sc = cfg.sim_config();
  const auto t0 = std::chrono::steady_clock::now();
  const KernelPair k = solve_kernels(sc.chars(), sc.params.length, cfg.kernel_n);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const ResidualReport res = kernel_residual(k);
  const double rel = res.max() / residual_scale(k);
  {
    std::ofstream os(fs::path(cfg.out) / "kernels.csv");
    if (!os) throw ModelIoError("cannot write kernels.csv in " + cfg.out);
    write_kernel_csv(k, os);
  }
  std::printf("lambda1 = %.6g m/s, lambda2 = %.6g m/s, n = %d, solve %.3g s\n", k.chars.lambda1, k.chars.lambda2,
              cfg.kernel_n, seconds);
  std::printf("residuals: kw %.3e  kv %.3e  boundary %.3e  relative %.3e (tolerance %.1e)\n", res.res_kw, res.res_kv,
              res.res_bc, rel, kKernelResidualTolerance);
  write_summary(cfg, "solve_kernels",
                {{"lambda1", k.chars.lambda1},
                 {"lambda2", k.chars.lambda2},
                 {"res_kw", res.res_kw},
                 {"res_kv", res.res_kv},
                 {"res_bc", res.res_bc},
                 {"relative_residual", rel},
                 {"tolerance", kKernelResidualTolerance},
                 {"solve_seconds", seconds}},
                {"kernels.csv"});
  if (!(rel <= kKernelResidualTolerance)) {
    std::fprintf(stderr, "error: kernel residual above tolerance\n");
    return kNumerics;
  }
  return kOk;
}

int cmd_gen_dataset(const Globals& g, const std::string& kind) {
  ExperimentConfig cfg = load(g);
  if (kind == "kernel") cfg.dataset.kind = OperatorKind::kernel;
  if (kind == "law") cfg.dataset.kind = OperatorKind::law;
  const OperatorDataset ds = generate_dataset(cfg.dataset_spec());
  write_dataset(ds, cfg.dataset.dir);
  std::printf("%zu samples (%zu train, %zu validation), lambda2 in [%.6g, %.6g] m/s -> %s\n", ds.size(),
              ds.train.size(), ds.validation.size(), ds.lambda2.front(), ds.lambda2.back(), cfg.dataset.dir.c_str());
  write_summary(cfg, "gen_dataset",
                {{"kind", to_string(ds.kind())},
                 {"samples", ds.size()},
                 {"lambda2_span", {ds.lambda2.front(), ds.lambda2.back()}},
                 {"dataset_hash", ds.config_hash}},
                {cfg.dataset.dir + "/manifest.json"});
  return kOk;
}

int cmd_train(const Globals& g) {
  const ExperimentConfig cfg = load(g);
  const OperatorDataset ds = read_dataset(cfg.dataset.dir);
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult r;
  int code = kOk;
  try {
    r = train(cfg.network(), ds, cfg.training_params());
  } catch (const TrainingDiverged& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    r = e.partial();
    code = kNumerics;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const fs::path history = fs::path(cfg.out) / "training_history.csv";
  {
    std::ofstream os(history);
    if (!os) throw ModelIoError("cannot write " + history.string());
    os << std::setprecision(12) << "epoch,train_loss,val_loss,best_val\n";
    for (std::size_t e = 0; e < r.val_loss.size(); ++e) {
      os << e << ',' << r.train_loss[e] << ',' << r.val_loss[e] << ',' << r.best_val[e] << '\n';
    }
  }
  if (code != kOk) return code;
  fs::create_directories(fs::path(cfg.training.model_out).parent_path());
  save_model(r.model, cfg.training.model_out);
  const std::string model_hash = hex64(fnv1a64(serialize_model(r.model)));
  std::printf("%s: %zu epochs in %.1f s, best validation loss %.3e at epoch %d -> %s (hash %s)\n",
              to_string(ds.kind()), r.val_loss.size(), seconds, r.best_val.back(), r.best_epoch,
              cfg.training.model_out.c_str(), model_hash.c_str());
  write_summary(cfg, "train",
                {{"kind", to_string(ds.kind())},
                 {"epochs", r.val_loss.size()},
                 {"best_epoch", r.best_epoch},
                 {"best_val_loss", r.best_val.back()},
                 {"seconds", seconds},
                 {"dataset_hash", ds.config_hash},
                 {"model_hash", model_hash}},
                {cfg.training.model_out, "training_history.csv"});
  return kOk;
}

json row_json(const ControllerRow& r) {
  return {{"controller", r.name},
          {"step_time_s", r.step_time},
          {"cold_start_time_s", r.cold_start_time},
          {"avg_l2_error", r.error},
          {"initial_norm", r.initial_norm},
          {"final_norm", r.final_norm},
          {"warnings", r.warnings}};
}

int cmd_simulate(const Globals& g, const std::string& controller) {
  ExperimentConfig cfg = load(g);
  if (!controller.empty()) cfg.controller.type = controller;
  cfg.validate();
  const SimConfig sc = cfg.sim_config();
  auto c = make_controller(cfg.controller.type, cfg);
  const Trajectory traj = simulate(sc, initial_condition(cfg.sim.amplitude, cfg.sim.wavenumber, sc), *c);
  const std::string stem = cfg.controller.type;
  write_trajectory_csvs(traj, cfg.out, stem);
  write_plot_script(cfg.out, {stem});
  for (const auto& w : traj.diag.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const double final_norm = traj.norm(traj.size() - 1);
  std::printf("%s: %zu steps, norm %.4g -> %.4g, final mean density %.4f veh/km, speed %.4f m/s\n", stem.c_str(),
              traj.steps, traj.norm(0), final_norm,
              per_m_to_per_km(integrate_cells(traj.snapshots.back().rho, sc.params.length) / sc.params.length),
              integrate_cells(traj.snapshots.back().v, sc.params.length) / sc.params.length);
  write_summary(cfg, "simulate",
                {{"controller", stem},
                 {"steps", traj.steps},
                 {"initial_norm", traj.norm(0)},
                 {"final_norm", final_norm},
                 {"rho_star_veh_per_km", per_m_to_per_km(sc.eq.rho_star)},
                 {"v_star", sc.eq.v_star},
                 {"warnings", traj.diag.warnings}},
                {stem + "_state.csv", stem + "_control.csv", stem + "_norm.csv", "plot.py"});
  return kOk;
}

int cmd_compare(const Globals& g) {
  const ExperimentConfig cfg = load(g);
  const ComparisonReport rep = run_comparison(cfg, configured_factories(cfg));
  std::vector<std::string> stems, outputs{"comparison.csv", "plot.py"};
  json rows = json::array();
  std::printf("%-14s %14s %16s %12s %12s\n", "controller", "step time [s]", "cold start [s]", "avg L2 err",
              "final norm");
  for (const auto& r : rep.rows) {
    write_trajectory_csvs(r.trajectory, cfg.out, r.name);
    stems.push_back(r.name);
    for (const char* suffix : {"_state.csv", "_control.csv", "_norm.csv"}) outputs.push_back(r.name + suffix);
    rows.push_back(row_json(r));
    std::printf("%-14s %14.3e %16.3e %12.4e %12.4e\n", r.name.c_str(), r.step_time, r.cold_start_time, r.error,
                r.final_norm);
    for (const auto& w : r.warnings) std::fprintf(stderr, "warning (%s): %s\n", r.name.c_str(), w.c_str());
  }
  write_comparison_csv(rep, fs::path(cfg.out) / "comparison.csv");
  write_plot_script(cfg.out, stems);
  write_summary(cfg, "compare", {{"pi_kp", rep.pi_kp}, {"pi_ki", rep.pi_ki}, {"rows", rows}}, outputs);
  return kOk;
}

int cmd_measure_eps(const Globals& g) {
  const ExperimentConfig cfg = load(g);
  const DeepONet model = load_model(cfg.eps.model);
  std::vector<double> grid;
  const int n = cfg.eps.n_lambda2;
  for (int i = 0; i < n; ++i) {
    grid.push_back(n == 1 ? 0.5 * (model.sensor.lo + model.sensor.hi)
                          : model.sensor.lo + (model.sensor.hi - model.sensor.lo) * i / (n - 1));
  }
  DatasetSpec spec = cfg.dataset_spec();
  spec.kind = model.kind;
  const Oracle oracle = model.kind == OperatorKind::kernel ? kernel_oracle(cfg.params(), cfg.eps.grid_n)
                                                           : law_oracle(spec);
  const ApproxErrorReport rep = measure_eps(model, grid, oracle);
  std::printf("%s over %d lambda2 values: eps_sup %.4e  eps_l2 %.4e  value_sup %.4e\n",
              to_string(model.kind), n, rep.eps_sup, rep.eps_l2, rep.value_sup);
  write_summary(cfg, "measure_eps",
                {{"kind", to_string(model.kind)},
                 {"lambda2", grid},
                 {"eps_sup", rep.eps_sup},
                 {"eps_l2", rep.eps_l2},
                 {"value_sup", rep.value_sup},
                 {"evaluations", rep.evaluations}},
                {});
  return kOk;
}

int cmd_tune_pi(const Globals& g) {
  const ExperimentConfig cfg = load(g);
  const PITuning t = tune_pi(cfg);
  std::printf("kp = %.4g, ki = %.4g, integrated norm %.6g\n", t.kp, t.ki, t.cost);
  write_summary(cfg, "tune_pi", {{"kp", t.kp}, {"ki", t.ki}, {"integrated_norm", t.cost}}, {});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ARZ traffic boundary control: kernels, neural operators and closed-loop benchmarks"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "YAML experiment configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the configured seed");
  app.add_option("--out", g.out, "Output directory (relative artifact paths resolve against it)");

  std::string kind, controller;
  auto* solve = app.add_subcommand("solve-kernels", "Solve the gain kernels at the configured equilibrium");
  auto* gen = app.add_subcommand("gen-dataset", "Generate an operator-learning dataset");
  gen->add_option("--kind", kind, "Override dataset.kind")->check(CLI::IsMember({"kernel", "law"}));
  auto* trn = app.add_subcommand("train", "Train a DeepONet on the configured dataset");
  auto* sim = app.add_subcommand("simulate", "Run one closed loop and write trajectory CSVs");
  sim->add_option("--controller", controller, "Override controller.type")->check(CLI::IsMember(controller_names()));
  auto* cmp = app.add_subcommand("compare", "Run every configured controller on the same scenario");
  auto* eps = app.add_subcommand("measure-eps", "Measure a trained model's approximation error");
  auto* tune = app.add_subcommand("tune-pi", "Grid-search PI gains on the configured scenario");
  auto* dump = app.add_subcommand("default-config", "Print the default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*solve) return cmd_solve_kernels(g);
    if (*gen) return cmd_gen_dataset(g, kind);
    if (*trn) return cmd_train(g);
    if (*sim) return cmd_simulate(g, controller);
    if (*cmp) return cmd_compare(g);
    if (*eps) return cmd_measure_eps(g);
    if (*tune) return cmd_tune_pi(g);
    if (*dump) {
      std::cout << serialize_config(ExperimentConfig{});
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const ModelIoError& e) {
    std::fprintf(stderr, "model/file error: %s\n", e.what());
    return kModelIo;
  } catch (const NumericsError& e) {
    std::fprintf(stderr, "numerics error: %s\n", e.what());
    return kNumerics;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "file error: %s\n", e.what());
    return kModelIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}
