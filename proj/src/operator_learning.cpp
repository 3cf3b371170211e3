#include "arz/operator_learning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "arz/control.hpp"

namespace arz {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Datasets

void DatasetSpec::validate() const {
  params.validate();
  if (n_samples < 1) throw ConfigError("dataset.n_samples must be positive");
  if (!(rho_min <= rho_max)) throw ConfigError("dataset: rho_min must not exceed rho_max");
  if (n_samples > 1 && !(rho_min < rho_max)) throw ConfigError("dataset: density span is empty");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("dataset.validation_fraction must lie in [0, 1)");
  }
  if (grid_n < 3 || kernel_n < 3) throw ConfigError("dataset: kernel grids need at least 3 nodes per side");
  // Both ends must sit in the congested regime.
  equilibrium(rho_min, params);
  equilibrium(rho_max, params);
}

std::string DatasetSpec::canonical() const {
  std::ostringstream os;
  os << std::setprecision(17) << "kind=" << to_string(kind) << ";v_f=" << params.v_f << ";rho_m=" << params.rho_m
     << ";gamma=" << params.gamma << ";tau=" << params.tau << ";L=" << params.length << ";rho_min=" << rho_min
     << ";rho_max=" << rho_max << ";n_samples=" << n_samples << ";val_frac=" << validation_fraction;
  if (kind == OperatorKind::kernel) {
    os << ";grid_n=" << grid_n;
  } else {
    os << ";nx=" << nx << ";t_end=" << t_end << ";cfl=" << cfl << ";record_every=" << record_every
       << ";A=" << amplitude << ";k=" << wavenumber << ";kernel_n=" << kernel_n;
  }
  return os.str();
}

SimConfig DatasetSpec::sim_config(const Equilibrium& eq) const {
  SimConfig cfg;
  cfg.params = params;
  cfg.eq = eq;
  cfg.nx = nx;
  cfg.t_end = t_end;
  cfg.cfl = cfl;
  cfg.record_every = record_every;
  cfg.mode = SimMode::nonlinear;
  return cfg;
}

void assign_split(OperatorDataset& ds, double validation_fraction) {
  const std::size_t n = ds.size();
  ds.train.clear();
  ds.validation.clear();
  std::size_t n_val = n >= 3 ? static_cast<std::size_t>(std::lround(validation_fraction * static_cast<double>(n))) : 0;
  n_val = std::min(n_val, n >= 2 ? n - 2 : 0);
  std::vector<char> held(n, 0);
  if (n_val > 0) {
    const double stride = static_cast<double>(n) / static_cast<double>(n_val);
    for (std::size_t k = 0; k < n_val; ++k) {
      auto idx = static_cast<std::size_t>((static_cast<double>(k) + 0.5) * stride);
      idx = std::clamp<std::size_t>(idx, 1, n - 2);
      held[idx] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i) (held[i] ? ds.validation : ds.train).push_back(i);
}

namespace {

std::vector<double> density_grid(const DatasetSpec& spec) {
  std::vector<double> rho(static_cast<std::size_t>(spec.n_samples));
  for (int i = 0; i < spec.n_samples; ++i) {
    rho[static_cast<std::size_t>(i)] =
        spec.n_samples == 1 ? spec.rho_min
                            : spec.rho_min + (spec.rho_max - spec.rho_min) * i / (spec.n_samples - 1);
  }
  return rho;
}

OperatorDataset empty_dataset(const DatasetSpec& spec) {
  spec.validate();
  OperatorDataset ds;
  ds.spec = spec;
  ds.rho_star = density_grid(spec);
  ds.config_hash = hex64(fnv1a64(spec.canonical()));
  for (double rho : ds.rho_star) ds.lambda2.push_back(characteristics(equilibrium(rho, spec.params), spec.params).lambda2);
  return ds;
}

}  // namespace

Eigen::MatrixXd kernel_grid_points(const KernelGrid& grid) {
  Eigen::MatrixXd pts(2, static_cast<Eigen::Index>(grid.node_count()));
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const auto q = static_cast<Eigen::Index>(grid.index(i, j));
      pts(0, q) = grid.coord(i);
      pts(1, q) = grid.coord(j);
    }
  }
  return pts;
}

OperatorDataset gen_kernel_dataset(const DatasetSpec& spec) {
  if (spec.kind != OperatorKind::kernel) throw ConfigError("gen_kernel_dataset: spec is not a kernel dataset");
  OperatorDataset ds = empty_dataset(spec);
  const KernelGrid grid(spec.grid_n, spec.params.length);
  ds.points = kernel_grid_points(grid);
  const auto n = static_cast<Eigen::Index>(ds.size());
  const auto p = static_cast<Eigen::Index>(grid.node_count());
  ds.targets.assign(2, Eigen::MatrixXd(n, p));
  for (Eigen::Index s = 0; s < n; ++s) {
    const Equilibrium eq = equilibrium(ds.rho_star[static_cast<std::size_t>(s)], spec.params);
    const KernelPair k = solve_kernels(characteristics(eq, spec.params), spec.params.length, spec.grid_n);
    const double rel = kernel_residual(k).max() / residual_scale(k);
    if (!(rel <= kKernelResidualTolerance)) {
      std::ostringstream os;
      os << "gen_kernel_dataset: kernel residual " << rel << " above tolerance at lambda2 = " << k.chars.lambda2;
      throw NumericsError(os.str());
    }
    for (Eigen::Index q = 0; q < p; ++q) {
      ds.targets[0](s, q) = k.kw[static_cast<std::size_t>(q)];
      ds.targets[1](s, q) = k.kv[static_cast<std::size_t>(q)];
    }
  }
  assign_split(ds, spec.validation_fraction);
  return ds;
}

OperatorDataset gen_law_dataset(const DatasetSpec& spec) {
  if (spec.kind != OperatorKind::law) throw ConfigError("gen_law_dataset: spec is not a law dataset");
  OperatorDataset ds = empty_dataset(spec);
  const auto n = static_cast<Eigen::Index>(ds.size());
  for (Eigen::Index s = 0; s < n; ++s) {
    const Equilibrium eq = equilibrium(ds.rho_star[static_cast<std::size_t>(s)], spec.params);
    const SimConfig cfg = spec.sim_config(eq);
    BacksteppingController bs(solve_kernels(cfg.chars(), spec.params.length, spec.kernel_n));
    const Trajectory traj = simulate(cfg, initial_condition(spec.amplitude, spec.wavenumber, cfg), bs);
    if (s == 0) {
      ds.points.resize(1, static_cast<Eigen::Index>(traj.size()));
      for (std::size_t k = 0; k < traj.size(); ++k) ds.points(0, static_cast<Eigen::Index>(k)) = traj.time(k);
      ds.targets.assign(1, Eigen::MatrixXd(n, ds.points.cols()));
    }
    if (static_cast<Eigen::Index>(traj.size()) != ds.points.cols()) {
      throw NumericsError("gen_law_dataset: record grids differ between samples");
    }
    for (std::size_t k = 0; k < traj.size(); ++k) ds.targets[0](s, static_cast<Eigen::Index>(k)) = traj.control[k];
  }
  assign_split(ds, spec.validation_fraction);
  return ds;
}

OperatorDataset generate_dataset(const DatasetSpec& spec) {
  return spec.kind == OperatorKind::kernel ? gen_kernel_dataset(spec) : gen_law_dataset(spec);
}

namespace {

json spec_to_json(const DatasetSpec& s) {
  return json{{"kind", to_string(s.kind)},
              {"v_f", s.params.v_f},
              {"rho_m", s.params.rho_m},
              {"gamma", s.params.gamma},
              {"tau", s.params.tau},
              {"length", s.params.length},
              {"rho_min", s.rho_min},
              {"rho_max", s.rho_max},
              {"n_samples", s.n_samples},
              {"validation_fraction", s.validation_fraction},
              {"grid_n", s.grid_n},
              {"nx", s.nx},
              {"t_end", s.t_end},
              {"cfl", s.cfl},
              {"record_every", s.record_every},
              {"amplitude", s.amplitude},
              {"wavenumber", s.wavenumber},
              {"kernel_n", s.kernel_n}};
}

DatasetSpec spec_from_json(const json& j) {
  DatasetSpec s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == to_string(OperatorKind::kernel)) {
    s.kind = OperatorKind::kernel;
  } else if (kind == to_string(OperatorKind::law)) {
    s.kind = OperatorKind::law;
  } else {
    throw ModelIoError("dataset manifest: unknown kind '" + kind + "'");
  }
  s.params.v_f = j.at("v_f");
  s.params.rho_m = j.at("rho_m");
  s.params.gamma = j.at("gamma");
  s.params.tau = j.at("tau");
  s.params.length = j.at("length");
  s.rho_min = j.at("rho_min");
  s.rho_max = j.at("rho_max");
  s.n_samples = j.at("n_samples");
  s.validation_fraction = j.at("validation_fraction");
  s.grid_n = j.at("grid_n");
  s.nx = j.at("nx");
  s.t_end = j.at("t_end");
  s.cfl = j.at("cfl");
  s.record_every = j.at("record_every");
  s.amplitude = j.at("amplitude");
  s.wavenumber = j.at("wavenumber");
  s.kernel_n = j.at("kernel_n");
  return s;
}

std::string sample_name(std::size_t i) {
  std::ostringstream os;
  os << "sample_" << std::setw(4) << std::setfill('0') << i << ".csv";
  return os.str();
}

}  // namespace

void write_dataset(const OperatorDataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ModelIoError("cannot create dataset directory " + dir.string());
  const bool kernel = ds.kind() == OperatorKind::kernel;
  for (std::size_t s = 0; s < ds.size(); ++s) {
    std::ofstream os(dir / sample_name(s));
    if (!os) throw ModelIoError("cannot write dataset sample in " + dir.string());
    os << std::setprecision(17) << (kernel ? "x,xi,kw,kv\n" : "t,U\n");
    const auto row = static_cast<Eigen::Index>(s);
    for (Eigen::Index q = 0; q < ds.points.cols(); ++q) {
      for (Eigen::Index d = 0; d < ds.points.rows(); ++d) os << ds.points(d, q) << ',';
      for (int h = 0; h < ds.heads(); ++h) {
        os << ds.targets[static_cast<std::size_t>(h)](row, q) << (h + 1 < ds.heads() ? ',' : '\n');
      }
    }
  }
  json manifest;
  manifest["format"] = "arz-operator-dataset";
  manifest["version"] = 1;
  manifest["spec"] = spec_to_json(ds.spec);
  manifest["config_hash"] = ds.config_hash;
  manifest["rho_star"] = ds.rho_star;
  manifest["lambda2"] = ds.lambda2;
  manifest["lambda2_span"] = {ds.lambda2.front(), ds.lambda2.back()};
  manifest["train"] = ds.train;
  manifest["validation"] = ds.validation;
  manifest["points"] = ds.points.cols();
  std::vector<std::string> files;
  for (std::size_t s = 0; s < ds.size(); ++s) files.push_back(sample_name(s));
  manifest["samples"] = files;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw ModelIoError("cannot write dataset manifest in " + dir.string());
  os << std::setprecision(17) << manifest.dump(2) << '\n';
}

OperatorDataset read_dataset(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw ModelIoError("dataset manifest not found in " + dir.string());
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw ModelIoError("dataset manifest unreadable: " + std::string(e.what()));
  }
  OperatorDataset ds;
  try {
    ds.spec = spec_from_json(manifest.at("spec"));
    ds.config_hash = manifest.at("config_hash").get<std::string>();
    ds.rho_star = manifest.at("rho_star").get<std::vector<double>>();
    ds.lambda2 = manifest.at("lambda2").get<std::vector<double>>();
    ds.train = manifest.at("train").get<std::vector<std::size_t>>();
    ds.validation = manifest.at("validation").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw ModelIoError("dataset manifest incomplete: " + std::string(e.what()));
  }
  const bool kernel = ds.kind() == OperatorKind::kernel;
  const int dims = kernel ? 2 : 1;
  const int heads = kernel ? 2 : 1;
  const auto files = manifest.at("samples").get<std::vector<std::string>>();
  if (files.size() != ds.lambda2.size()) throw ModelIoError("dataset manifest: sample count mismatch");
  const auto n_points = manifest.at("points").get<Eigen::Index>();
  ds.points.resize(dims, n_points);
  ds.targets.assign(static_cast<std::size_t>(heads), Eigen::MatrixXd(static_cast<Eigen::Index>(files.size()), n_points));
  for (std::size_t s = 0; s < files.size(); ++s) {
    std::ifstream cs(dir / files[s]);
    if (!cs) throw ModelIoError("dataset sample missing: " + files[s]);
    std::string line;
    std::getline(cs, line);
    Eigen::Index q = 0;
    while (std::getline(cs, line)) {
      if (line.empty()) continue;
      if (q >= n_points) throw ModelIoError("dataset sample has too many rows: " + files[s]);
      std::istringstream ls(line);
      std::vector<double> cols;
      std::string cell;
      while (std::getline(ls, cell, ',')) cols.push_back(std::stod(cell));
      if (static_cast<int>(cols.size()) != dims + heads) throw ModelIoError("dataset sample malformed: " + files[s]);
      for (int d = 0; d < dims; ++d) {
        if (s == 0) {
          ds.points(d, q) = cols[static_cast<std::size_t>(d)];
        } else if (ds.points(d, q) != cols[static_cast<std::size_t>(d)]) {
          throw ModelIoError("dataset samples disagree on trunk points: " + files[s]);
        }
      }
      for (int h = 0; h < heads; ++h) {
        ds.targets[static_cast<std::size_t>(h)](static_cast<Eigen::Index>(s), q) = cols[static_cast<std::size_t>(dims + h)];
      }
      ++q;
    }
    if (q != n_points) throw ModelIoError("dataset sample has too few rows: " + files[s]);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Training

void TrainingParams::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("training.learning_rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("training.lr_decay must lie in (0, 1]");
  if (max_epochs < 1) throw ConfigError("training.max_epochs must be positive");
  if (patience < 1) throw ConfigError("training.patience must be positive");
  if (batch_points < 1 || batch_instances < 1) throw ConfigError("training batch sizes must be positive");
}

namespace {

void fit_output_scalers(DeepONet& model, const OperatorDataset& ds) {
  for (int h = 0; h < ds.heads(); ++h) {
    const Eigen::MatrixXd& t = ds.targets[static_cast<std::size_t>(h)];
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (std::size_t s : ds.train) {
      const auto row = t.row(static_cast<Eigen::Index>(s));
      sum += row.sum();
      sq += row.squaredNorm();
      count += static_cast<std::size_t>(row.size());
    }
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(sq / static_cast<double>(count) - mean * mean, 0.0);
    const double scale = var > 0.0 ? std::sqrt(var) : (std::abs(mean) > 0.0 ? std::abs(mean) : 1.0);
    model.outputs[static_cast<std::size_t>(h)] = {mean, scale};
  }
}

// Normalized loss and its gradient with respect to the branch and trunk features.
double feature_loss(const DeepONet& model, const OperatorDataset& ds, const Eigen::MatrixXd& bf,
                    const Eigen::MatrixXd& tf, std::span<const std::size_t> samples,
                    std::span<const Eigen::Index> cols, Eigen::MatrixXd* d_bf, Eigen::MatrixXd* d_tf) {
  const auto nb = static_cast<Eigen::Index>(samples.size());
  const auto np = static_cast<Eigen::Index>(cols.size());
  const double norm = 1.0 / (static_cast<double>(nb) * static_cast<double>(np) * model.heads);
  double loss = 0.0;
  if (d_bf) d_bf->setZero(bf.rows(), bf.cols());
  if (d_tf) d_tf->setZero(tf.rows(), tf.cols());
  Eigen::MatrixXd target(nb, np);
  for (int h = 0; h < model.heads; ++h) {
    const OutputScaler& sc = model.outputs[static_cast<std::size_t>(h)];
    const Eigen::MatrixXd& src = ds.targets[static_cast<std::size_t>(h)];
    for (Eigen::Index b = 0; b < nb; ++b) {
      const auto row = static_cast<Eigen::Index>(samples[static_cast<std::size_t>(b)]);
      for (Eigen::Index q = 0; q < np; ++q) target(b, q) = (src(row, cols[static_cast<std::size_t>(q)]) - sc.mean) / sc.scale;
    }
    const Eigen::MatrixXd resid = DeepONet::combine(bf, tf, h, model.p) - target;
    loss += resid.squaredNorm() * norm;
    if (d_bf || d_tf) {
      const Eigen::MatrixXd g = (2.0 * norm) * resid;  // nb × np
      const auto block = bf.middleRows(static_cast<Eigen::Index>(h) * model.p, model.p);
      if (d_bf) d_bf->middleRows(static_cast<Eigen::Index>(h) * model.p, model.p).noalias() += tf * g.transpose();
      if (d_tf) d_tf->noalias() += block * g;
    }
  }
  return loss;
}

}  // namespace

double dataset_loss(const DeepONet& model, const OperatorDataset& ds, std::span<const std::size_t> samples) {
  if (samples.empty()) return 0.0;
  std::vector<double> l2;
  for (std::size_t s : samples) l2.push_back(ds.lambda2[s]);
  const Eigen::MatrixXd bf = model.branch_features(l2);
  const Eigen::MatrixXd tf = model.trunk_features(ds.points);
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(ds.points.cols()));
  std::iota(cols.begin(), cols.end(), Eigen::Index{0});
  return feature_loss(model, ds, bf, tf, samples, cols, nullptr, nullptr);
}

TrainResult train(const NetworkSpec& net, const OperatorDataset& ds, const TrainingParams& tp) {
  tp.validate();
  if (ds.train.empty()) throw ConfigError("train: dataset has no training samples");
  std::mt19937_64 rng(tp.seed);
  const double lo = *std::min_element(ds.lambda2.begin(), ds.lambda2.end());
  const double hi = *std::max_element(ds.lambda2.begin(), ds.lambda2.end());
  // A single-instance dataset still needs a non-degenerate sensor range.
  const double pad = hi > lo ? 0.0 : std::max(1e-3, 1e-3 * std::abs(lo));
  const double horizon = ds.kind() == OperatorKind::law ? ds.points.row(0).maxCoeff() : 0.0;
  DeepONet model = DeepONet::create(ds.kind(), net, lo - pad, hi + pad, ds.spec.params.length, horizon, rng);
  fit_output_scalers(model, ds);

  Adam branch_opt(model.branch.layers());
  Adam trunk_opt(model.trunk.layers());

  const std::span<const std::size_t> check = ds.validation.empty() ? std::span<const std::size_t>(ds.train)
                                                                   : std::span<const std::size_t>(ds.validation);
  TrainResult result;
  result.model = model;
  double best = dataset_loss(model, ds, check);
  const double initial = best;
  int since_best = 0;

  std::vector<std::size_t> order = ds.train;
  std::vector<Eigen::Index> all_cols(static_cast<std::size_t>(ds.points.cols()));
  std::iota(all_cols.begin(), all_cols.end(), Eigen::Index{0});
  const auto bp = std::min<std::size_t>(static_cast<std::size_t>(tp.batch_points), all_cols.size());
  const auto bi = std::min<std::size_t>(static_cast<std::size_t>(tp.batch_instances), order.size());

  auto branch_grads = model.branch.zero_gradients();
  auto trunk_grads = model.trunk.zero_gradients();
  Mlp::Tape branch_tape, trunk_tape;
  Eigen::MatrixXd d_bf, d_tf;
  double lr = tp.learning_rate;

  for (int epoch = 0; epoch < tp.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += bi) {
      const std::size_t end = std::min(order.size(), start + bi);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      // Partial Fisher–Yates: the first bp entries become a uniform sample of points.
      for (std::size_t q = 0; q < bp; ++q) {
        std::uniform_int_distribution<std::size_t> pick(q, all_cols.size() - 1);
        std::swap(all_cols[q], all_cols[pick(rng)]);
      }
      const std::span<const Eigen::Index> cols(all_cols.data(), bp);

      std::vector<double> l2;
      for (std::size_t s : batch) l2.push_back(ds.lambda2[s]);
      Eigen::MatrixXd pts(ds.points.rows(), static_cast<Eigen::Index>(bp));
      for (std::size_t q = 0; q < bp; ++q) pts.col(static_cast<Eigen::Index>(q)) = ds.points.col(cols[q]);

      const Eigen::MatrixXd bf = model.branch.forward(model.branch_input(l2), branch_tape);
      const Eigen::MatrixXd tf = model.trunk.forward(model.trunk_input(pts), trunk_tape);
      epoch_loss += feature_loss(model, ds, bf, tf, batch, cols, &d_bf, &d_tf);
      ++steps;

      for (auto& g : branch_grads) { g.weight.setZero(); g.bias.setZero(); }
      for (auto& g : trunk_grads) { g.weight.setZero(); g.bias.setZero(); }
      model.branch.backward(branch_tape, d_bf, branch_grads);
      model.trunk.backward(trunk_tape, d_tf, trunk_grads);
      branch_opt.step(model.branch.layers(), branch_grads, lr);
      trunk_opt.step(model.trunk.layers(), trunk_grads, lr);
    }
    lr *= tp.lr_decay;

    const double val = dataset_loss(model, ds, check);
    result.train_loss.push_back(epoch_loss / steps);
    result.val_loss.push_back(val);
    if (!std::isfinite(val) || val > 1e4 * std::max(initial, 1e-12)) {
      result.best_val.push_back(best);
      std::ostringstream os;
      os << "training diverged at epoch " << epoch << " (validation loss " << val << ")";
      throw TrainingDiverged(os.str(), std::move(result));
    }
    if (val < best) {
      best = val;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= tp.patience) {
      result.best_val.push_back(best);
      break;
    }
    result.best_val.push_back(best);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Approximation error

Oracle kernel_oracle(const ModelParams& params, int n) {
  return [params, n](double lambda2) {
    const Equilibrium eq = equilibrium_for_lambda2(lambda2, params);
    const KernelPair k = solve_kernels(characteristics(eq, params), params.length, n);
    OracleSample s;
    s.grid = k.grid;
    s.points = kernel_grid_points(k.grid);
    s.heads = {k.kw, k.kv};
    return s;
  };
}

Oracle law_oracle(const DatasetSpec& spec) {
  return [spec](double lambda2) {
    const Equilibrium eq = equilibrium_for_lambda2(lambda2, spec.params);
    const SimConfig cfg = spec.sim_config(eq);
    BacksteppingController bs(solve_kernels(cfg.chars(), spec.params.length, spec.kernel_n));
    const Trajectory traj = simulate(cfg, initial_condition(spec.amplitude, spec.wavenumber, cfg), bs);
    OracleSample s;
    s.points.resize(1, static_cast<Eigen::Index>(traj.size()));
    for (std::size_t k = 0; k < traj.size(); ++k) s.points(0, static_cast<Eigen::Index>(k)) = traj.time(k);
    s.heads = {traj.control};
    return s;
  };
}

ApproxErrorReport measure_eps(const Predictor& predict, std::span<const double> lambda2_grid, const Oracle& oracle) {
  ApproxErrorReport rep;
  double sq = 0.0;
  for (double l2 : lambda2_grid) {
    const OracleSample ref = oracle(l2);
    const auto pred = predict(l2, ref.points);
    if (pred.size() != ref.heads.size()) throw ShapeError("measure_eps: head count mismatch");
    for (std::size_t h = 0; h < ref.heads.size(); ++h) {
      const auto& r = ref.heads[h];
      if (pred[h].size() != r.size()) throw ShapeError("measure_eps: point count mismatch");
      std::vector<double> err(r.size());
      for (std::size_t q = 0; q < r.size(); ++q) {
        err[q] = pred[h][q] - r[q];
        sq += err[q] * err[q];
        rep.value_sup = std::max(rep.value_sup, std::abs(err[q]));
        ++rep.evaluations;
      }
      if (!ref.grid) {
        for (double e : err) rep.eps_sup = std::max(rep.eps_sup, std::abs(e));
        continue;
      }
      const KernelGrid& g = *ref.grid;
      for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j <= i; ++j) {
          double total = std::abs(err[g.index(i, j)]);
          if (auto dx = grid_derivative(g, err, i, j, 0)) total += std::abs(*dx);
          if (auto dxi = grid_derivative(g, err, i, j, 1)) total += std::abs(*dxi);
          rep.eps_sup = std::max(rep.eps_sup, total);
        }
      }
    }
  }
  rep.eps_l2 = rep.evaluations ? std::sqrt(sq / static_cast<double>(rep.evaluations)) : 0.0;
  return rep;
}

ApproxErrorReport measure_eps(const DeepONet& model, std::span<const double> lambda2_grid, const Oracle& oracle) {
  return measure_eps(
      [&model](double l2, const Eigen::MatrixXd& pts) { return deeponet_eval(model, l2, pts).heads; },
      lambda2_grid, oracle);
}

}  // namespace arz
