#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "arz/control.hpp"
#include "arz/deeponet.hpp"
#include "arz/operator_learning.hpp"
#include "arz/simulator.hpp"

namespace arz {

/// Experiment configuration as read from the YAML file. Densities here are in
/// veh/km like the file; everything else is SI.
struct ExperimentConfig {
  struct Model {
    double v_f = 40.0;
    double rho_m = 160.0;  // [veh/km]
    double gamma = 1.0;
    double tau = 60.0;
    double length = 500.0;
    bool operator==(const Model&) const = default;
  } model;
  double rho_star = 120.0;  // [veh/km]

  struct Sim {
    int nx = 100;
    double t_end = 300.0;
    double cfl = 0.8;
    double record_every = 1.0;
    SimMode mode = SimMode::nonlinear;
    double amplitude = 0.1;
    int wavenumber = 3;
    bool operator==(const Sim&) const = default;
  } sim;

  int kernel_n = 101;

  struct Controller {
    std::string type = "backstepping";  // backstepping | no_kernels | no_law | pi | open_loop
    // Grid-searched by tune_pi on the default scenario (kp ∈ [−2, 2], ki ∈ [−0.05, 0.05]).
    double kp = -0.4;
    double ki = 0.0;
    std::string kernel_model = "models/kernel.bin";
    std::string law_model = "models/law.bin";
    bool operator==(const Controller&) const = default;
  } controller;

  struct Compare {
    std::vector<std::string> controllers{"backstepping", "no_kernels", "no_law", "pi", "open_loop"};
    int timing_repeats = 7;
    bool operator==(const Compare&) const = default;
  } compare;

  struct Dataset {
    OperatorKind kind = OperatorKind::kernel;
    double rho_min = 90.0;   // [veh/km]
    double rho_max = 130.0;  // [veh/km]
    int n_samples = 900;
    double validation_fraction = 1.0 / 9.0;
    int grid_n = 51;
    std::string dir = "data/kernel";
    bool operator==(const Dataset&) const = default;
  } dataset;

  struct Training {
    double learning_rate = 1e-3;
    double lr_decay = 0.998;
    int max_epochs = 2000;
    int patience = 100;
    int batch_points = 256;
    int batch_instances = 16;
    int width = 64;
    int depth = 3;
    int p = 32;
    std::string model_out = "models/kernel.bin";
    bool operator==(const Training&) const = default;
  } training;

  struct Eps {
    std::string model = "models/kernel.bin";
    int n_lambda2 = 21;  // test λ₂ values spread over the trained range
    int grid_n = 51;     // kernel oracle nodes per side
    bool operator==(const Eps&) const = default;
  } eps;

  std::string out = "out";
  std::uint64_t seed = 0;

  bool operator==(const ExperimentConfig&) const = default;

  /// Checks cross-field constraints; throws ConfigError.
  void validate() const;

  [[nodiscard]] ModelParams params() const;
  [[nodiscard]] Equilibrium equilibrium_state() const;
  [[nodiscard]] SimConfig sim_config() const;
  [[nodiscard]] DatasetSpec dataset_spec() const;
  [[nodiscard]] TrainingParams training_params() const;
  [[nodiscard]] NetworkSpec network() const;
};

/// Throws ConfigError naming the offending key and its line.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
/// Full YAML with every key; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// Controllers accepted by the simulate and compare commands.
const std::vector<std::string>& controller_names();

/// Builds a controller for the configured scenario. Loads NO models from the
/// configured paths (ModelIoError if missing or of the wrong kind).
std::unique_ptr<BoundaryController> make_controller(const std::string& type, const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Metrics

/// sqrt(Σ_t ‖ρ_c − ρ_bs‖² + ‖v_c − v_bs‖²) / sqrt(Σ_t ‖ρ_bs − ρ*‖² + ‖v_bs − v*‖²),
/// sums over recorded snapshots, spatial L² norms over [0, L].
double average_l2_error(const Trajectory& candidate, const Trajectory& baseline, const Equilibrium& eq,
                        double length);

struct ControllerRow {
  std::string name;
  double step_time = 0.0;        // median control evaluation [s]
  double cold_start_time = 0.0;  // median of synthesis + first evaluation [s]
  double error = 0.0;            // average_l2_error vs backstepping
  double initial_norm = 0.0;
  double final_norm = 0.0;
  std::vector<std::string> warnings;
  Trajectory trajectory;
};

struct ComparisonReport {
  std::vector<ControllerRow> rows;
  double pi_kp = 0.0;
  double pi_ki = 0.0;
  [[nodiscard]] const ControllerRow& row(const std::string& name) const;
};

/// Controllers built in-process (the compare command loads them from disk).
struct ControllerFactory {
  std::string name;
  std::function<std::unique_ptr<BoundaryController>()> make;
};

/// Runs every factory on the configured scenario. The first factory is the
/// error baseline; timings are medians over cfg.compare.timing_repeats.
ComparisonReport run_comparison(const ExperimentConfig& cfg, const std::vector<ControllerFactory>& factories);

/// Factories for cfg.compare.controllers; NO models come from `kernel_model` /
/// `law_model` when given, else from the configured paths.
std::vector<ControllerFactory> configured_factories(const ExperimentConfig& cfg,
                                                    std::shared_ptr<const DeepONet> kernel_model = nullptr,
                                                    std::shared_ptr<const DeepONet> law_model = nullptr);

struct PITuning {
  double kp = 0.0;
  double ki = 0.0;
  double cost = 0.0;  // time-integrated ‖(w̃, ṽ)‖ [m^{1/2}·(m/s)·s]
};

/// Grid search over kp ∈ [−2, 2], ki ∈ [−0.05, 0.05] minimizing ∫‖(w̃, ṽ)‖dt.
/// Runs that leave the admissible state range are skipped.
PITuning tune_pi(const ExperimentConfig& cfg, int kp_steps = 21, int ki_steps = 11);

/// Trapezoidal ∫‖(w̃, ṽ)‖dt over the recorded snapshots.
double integrated_norm(const Trajectory& traj);

// ---------------------------------------------------------------------------
// Output

void write_trajectory_csvs(const Trajectory& traj, const std::filesystem::path& dir, const std::string& stem);
void write_comparison_csv(const ComparisonReport& report, const std::filesystem::path& path);
/// matplotlib script rendering surfaces, U(t) and norm overlays from the CSVs.
void write_plot_script(const std::filesystem::path& dir, const std::vector<std::string>& stems);

}  // namespace arz
