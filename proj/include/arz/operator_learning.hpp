#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arz/deeponet.hpp"
#include "arz/errors.hpp"
#include "arz/kernel_solver.hpp"
#include "arz/simulator.hpp"

namespace arz {

/// Everything that determines a generated dataset; its canonical text is hashed
/// into the provenance tag.
struct DatasetSpec {
  OperatorKind kind = OperatorKind::kernel;
  ModelParams params;
  double rho_min = 0.090;  // [veh/m], λ₂ = 5 m/s with default params
  double rho_max = 0.130;  // [veh/m], λ₂ = 25 m/s
  int n_samples = 900;
  double validation_fraction = 1.0 / 9.0;
  int grid_n = 51;  // kernel datasets: nodes per side of 𝒯
  // Law datasets: closed-loop scenario re-run at every ρ*.
  int nx = 100;
  double t_end = 300.0;
  double cfl = 0.8;
  double record_every = 1.0;
  double amplitude = 0.1;
  int wavenumber = 3;
  int kernel_n = 101;

  void validate() const;
  [[nodiscard]] std::string canonical() const;
  [[nodiscard]] SimConfig sim_config(const Equilibrium& eq) const;
};

/// Samples share one set of trunk points; targets[h] is samples × points.
struct OperatorDataset {
  DatasetSpec spec;
  std::vector<double> rho_star;
  std::vector<double> lambda2;
  Eigen::MatrixXd points;
  std::vector<Eigen::MatrixXd> targets;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::string config_hash;

  [[nodiscard]] OperatorKind kind() const { return spec.kind; }
  [[nodiscard]] std::size_t size() const { return lambda2.size(); }
  [[nodiscard]] int heads() const { return static_cast<int>(targets.size()); }
};

/// Evenly spread held-out indices; the first and last sample always train.
void assign_split(OperatorDataset& ds, double validation_fraction);

/// ρ* uniformly spaced over [rho_min, rho_max]; kernels from solve_kernels,
/// each gated on kKernelResidualTolerance before inclusion.
OperatorDataset gen_kernel_dataset(const DatasetSpec& spec);

/// Exact-backstepping closed loop at every ρ*; targets are U(t) on the record grid.
OperatorDataset gen_law_dataset(const DatasetSpec& spec);

OperatorDataset generate_dataset(const DatasetSpec& spec);

/// Directory layout: manifest.json plus sample_NNNN.csv (x,xi,kw,kv or t,U).
void write_dataset(const OperatorDataset& ds, const std::filesystem::path& dir);
OperatorDataset read_dataset(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------

struct TrainingParams {
  double learning_rate = 1e-3;
  double lr_decay = 0.998;    // multiplicative, per epoch
  int max_epochs = 2000;
  int patience = 100;         // epochs without validation improvement
  int batch_points = 256;     // trunk points per step
  int batch_instances = 16;   // λ₂ samples per step
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  DeepONet model;                  // best-validation checkpoint
  std::vector<double> train_loss;  // mean normalized MSE per epoch
  std::vector<double> val_loss;
  std::vector<double> best_val;    // running minimum of val_loss
  int best_epoch = 0;
};

class TrainingDiverged : public NumericsError {
 public:
  TrainingDiverged(const std::string& what, TrainResult partial)
      : NumericsError(what), partial_(std::move(partial)) {}
  [[nodiscard]] const TrainResult& partial() const { return partial_; }

 private:
  TrainResult partial_;
};

/// Adam on the normalized mean-squared error. Each step draws batch_instances
/// samples and batch_points trunk points and trains on their outer product, so
/// the trunk runs once per point rather than once per (sample, point) pair.
/// Deterministic for a fixed seed.
TrainResult train(const NetworkSpec& net, const OperatorDataset& ds, const TrainingParams& tp);

/// Mean normalized squared error of `model` on the listed samples (all points).
double dataset_loss(const DeepONet& model, const OperatorDataset& ds, std::span<const std::size_t> samples);

// ---------------------------------------------------------------------------

struct ApproxErrorReport {
  double eps_sup = 0.0;    // max of |e| + |Δ_x e| + |Δ_ξ e| (value only for law models)
  double eps_l2 = 0.0;     // RMS of e
  double value_sup = 0.0;  // max |e|
  std::size_t evaluations = 0;
};

struct OracleSample {
  Eigen::MatrixXd points;                  // trunk_dim × P
  std::vector<std::vector<double>> heads;  // reference values
  std::optional<KernelGrid> grid;          // set when points are the nodes of a kernel grid
};

using Oracle = std::function<OracleSample(double lambda2)>;
using Predictor = std::function<std::vector<std::vector<double>>(double lambda2, const Eigen::MatrixXd& points)>;

/// Kernel nodes of an n-per-side grid with solver values at the λ₂ equilibrium.
Oracle kernel_oracle(const ModelParams& params, int n);

/// Exact-backstepping control trajectory for the scenario in `spec`.
Oracle law_oracle(const DatasetSpec& spec);

ApproxErrorReport measure_eps(const Predictor& predict, std::span<const double> lambda2_grid, const Oracle& oracle);
ApproxErrorReport measure_eps(const DeepONet& model, std::span<const double> lambda2_grid, const Oracle& oracle);

/// Trunk points of a kernel grid in packing order (2 × node_count).
Eigen::MatrixXd kernel_grid_points(const KernelGrid& grid);

}  // namespace arz
