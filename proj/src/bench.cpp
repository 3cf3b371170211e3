#include "arz/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "arz/errors.hpp"
#include "arz/grid.hpp"
#include "arz/kernel_solver.hpp"

namespace arz {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

const std::vector<std::string>& controller_names() {
  static const std::vector<std::string> names{"backstepping", "no_kernels", "no_law", "pi", "open_loop"};
  return names;
}

namespace {

bool known_controller(const std::string& name) {
  const auto& n = controller_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

}  // namespace

void ExperimentConfig::validate() const {
  const ModelParams p = params();
  p.validate();
  (void)equilibrium_state();
  sim_config().validate();
  if (kernel_n < 3) throw ConfigError("kernel_n must be at least 3");
  if (!known_controller(controller.type)) throw ConfigError("controller.type: unknown controller '" + controller.type + "'");
  if (compare.controllers.empty()) throw ConfigError("compare.controllers must not be empty");
  for (const auto& c : compare.controllers) {
    if (!known_controller(c)) throw ConfigError("compare.controllers: unknown controller '" + c + "'");
  }
  if (std::find(compare.controllers.begin(), compare.controllers.end(), "backstepping") == compare.controllers.end()) {
    throw ConfigError("compare.controllers must include backstepping (the error baseline)");
  }
  if (compare.timing_repeats < 1) throw ConfigError("compare.timing_repeats must be positive");
  dataset_spec().validate();
  training_params().validate();
  if (training.width < 1 || training.depth < 1 || training.p < 1) {
    throw ConfigError("training: width, depth and p must be positive");
  }
  if (eps.n_lambda2 < 1) throw ConfigError("eps.n_lambda2 must be positive");
  if (eps.grid_n < 3) throw ConfigError("eps.grid_n must be at least 3");
}

ModelParams ExperimentConfig::params() const {
  ModelParams p;
  p.v_f = model.v_f;
  p.rho_m = per_km_to_per_m(model.rho_m);
  p.gamma = model.gamma;
  p.tau = model.tau;
  p.length = model.length;
  return p;
}

Equilibrium ExperimentConfig::equilibrium_state() const { return equilibrium(per_km_to_per_m(rho_star), params()); }

SimConfig ExperimentConfig::sim_config() const {
  SimConfig c;
  c.params = params();
  c.eq = equilibrium_state();
  c.nx = sim.nx;
  c.t_end = sim.t_end;
  c.cfl = sim.cfl;
  c.mode = sim.mode;
  c.record_every = sim.record_every;
  return c;
}

DatasetSpec ExperimentConfig::dataset_spec() const {
  DatasetSpec s;
  s.kind = dataset.kind;
  s.params = params();
  s.rho_min = per_km_to_per_m(dataset.rho_min);
  s.rho_max = per_km_to_per_m(dataset.rho_max);
  s.n_samples = dataset.n_samples;
  s.validation_fraction = dataset.validation_fraction;
  s.grid_n = dataset.grid_n;
  s.nx = sim.nx;
  s.t_end = sim.t_end;
  s.cfl = sim.cfl;
  s.record_every = sim.record_every;
  s.amplitude = sim.amplitude;
  s.wavenumber = sim.wavenumber;
  s.kernel_n = kernel_n;
  return s;
}

TrainingParams ExperimentConfig::training_params() const {
  TrainingParams t;
  t.learning_rate = training.learning_rate;
  t.lr_decay = training.lr_decay;
  t.max_epochs = training.max_epochs;
  t.patience = training.patience;
  t.batch_points = training.batch_points;
  t.batch_instances = training.batch_instances;
  t.seed = seed;
  return t;
}

NetworkSpec ExperimentConfig::network() const { return {training.width, training.depth, training.p}; }

namespace {

class ConfigReader {
 public:
  explicit ConfigReader(std::string source) : source_(std::move(source)) {}

  using Handler = std::function<void(const YAML::Node& value, const std::string& key)>;

  void section(const YAML::Node& node, const std::string& prefix, const std::map<std::string, Handler>& handlers) {
    if (!node.IsMap()) fail(node, prefix.empty() ? "document" : prefix, "expected a mapping");
    for (auto it = node.begin(); it != node.end(); ++it) {
      const std::string name = it->first.as<std::string>();
      const std::string key = prefix.empty() ? name : prefix + "." + name;
      const auto h = handlers.find(name);
      if (h == handlers.end()) fail(it->first, key, "unknown key");
      h->second(it->second, key);
    }
  }

  template <typename T>
  Handler into(T& target) {
    return [this, &target](const YAML::Node& v, const std::string& key) { target = scalar<T>(v, key); };
  }

  template <typename T>
  T scalar(const YAML::Node& v, const std::string& key) {
    if (!v.IsScalar()) fail(v, key, "expected a scalar");
    try {
      return v.as<T>();
    } catch (const YAML::Exception&) {
      fail(v, key, std::string("cannot read '") + v.Scalar() + "' as " + type_name<T>());
    }
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& key, const std::string& what) const {
    std::ostringstream os;
    os << source_;
    if (at.Mark().line >= 0) os << ":" << at.Mark().line + 1;
    os << ": " << key << ": " << what;
    throw ConfigError(os.str());
  }

 private:
  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) return "an integer";
    if constexpr (std::is_same_v<T, double>) return "a number";
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    return "a string";
  }

  std::string source_;
};

SimMode parse_mode(ConfigReader& r, const YAML::Node& v, const std::string& key) {
  const auto s = r.scalar<std::string>(v, key);
  if (s == "nonlinear") return SimMode::nonlinear;
  if (s == "linearized") return SimMode::linearized;
  r.fail(v, key, "expected 'nonlinear' or 'linearized', got '" + s + "'");
}

OperatorKind parse_kind(ConfigReader& r, const YAML::Node& v, const std::string& key) {
  const auto s = r.scalar<std::string>(v, key);
  if (s == "kernel") return OperatorKind::kernel;
  if (s == "law") return OperatorKind::law;
  r.fail(v, key, "expected 'kernel' or 'law', got '" + s + "'");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream os;
    os << source << ":" << e.mark.line + 1 << ": malformed YAML: " << e.msg;
    throw ConfigError(os.str());
  }
  ExperimentConfig c;
  if (root.IsNull()) {
    c.validate();
    return c;
  }
  ConfigReader r(source);
  using H = ConfigReader::Handler;
  r.section(root, "",
            {
                {"model", H([&](const YAML::Node& n, const std::string& k) {
                   r.section(n, k,
                             {{"v_f", r.into(c.model.v_f)},
                              {"rho_m", r.into(c.model.rho_m)},
                              {"gamma", r.into(c.model.gamma)},
                              {"tau", r.into(c.model.tau)},
                              {"length", r.into(c.model.length)}});
                 })},
                {"rho_star", r.into(c.rho_star)},
                {"sim", H([&](const YAML::Node& n, const std::string& k) {
                   r.section(n, k,
                             {{"nx", r.into(c.sim.nx)},
                              {"t_end", r.into(c.sim.t_end)},
                              {"cfl", r.into(c.sim.cfl)},
                              {"record_every", r.into(c.sim.record_every)},
                              {"mode", H([&](const YAML::Node& v, const std::string& key) {
                                 c.sim.mode = parse_mode(r, v, key);
                               })},
                              {"amplitude", r.into(c.sim.amplitude)},
                              {"wavenumber", r.into(c.sim.wavenumber)}});
                 })},
                {"kernel_n", r.into(c.kernel_n)},
                {"controller", H([&](const YAML::Node& n, const std::string& k) {
                   r.section(n, k,
                             {{"type", r.into(c.controller.type)},
                              {"kp", r.into(c.controller.kp)},
                              {"ki", r.into(c.controller.ki)},
                              {"kernel_model", r.into(c.controller.kernel_model)},
                              {"law_model", r.into(c.controller.law_model)}});
                 })},
                {"compare", H([&](const YAML::Node& n, const std::string& k) {
                   r.section(n, k,
                             {{"controllers", H([&](const YAML::Node& v, const std::string& key) {
                                 if (!v.IsSequence()) r.fail(v, key, "expected a list");
                                 c.compare.controllers.clear();
                                 for (const auto& e : v) c.compare.controllers.push_back(r.scalar<std::string>(e, key));
                               })},
                              {"timing_repeats", r.into(c.compare.timing_repeats)}});
                 })},
                {"dataset", H([&](const YAML::Node& n, const std::string& k) {
                   r.section(n, k,
                             {{"kind", H([&](const YAML::Node& v, const std::string& key) {
                                 c.dataset.kind = parse_kind(r, v, key);
                               })},
                              {"rho_min", r.into(c.dataset.rho_min)},
                              {"rho_max", r.into(c.dataset.rho_max)},
                              {"n_samples", r.into(c.dataset.n_samples)},
                              {"validation_fraction", r.into(c.dataset.validation_fraction)},
                              {"grid_n", r.into(c.dataset.grid_n)},
                              {"dir", r.into(c.dataset.dir)}});
                 })},
                {"training", H([&](const YAML::Node& n, const std::string& k) {
                   r.section(n, k,
                             {{"learning_rate", r.into(c.training.learning_rate)},
                              {"lr_decay", r.into(c.training.lr_decay)},
                              {"max_epochs", r.into(c.training.max_epochs)},
                              {"patience", r.into(c.training.patience)},
                              {"batch_points", r.into(c.training.batch_points)},
                              {"batch_instances", r.into(c.training.batch_instances)},
                              {"width", r.into(c.training.width)},
                              {"depth", r.into(c.training.depth)},
                              {"p", r.into(c.training.p)},
                              {"model_out", r.into(c.training.model_out)}});
                 })},
                {"eps", H([&](const YAML::Node& n, const std::string& k) {
                   r.section(n, k,
                             {{"model", r.into(c.eps.model)},
                              {"n_lambda2", r.into(c.eps.n_lambda2)},
                              {"grid_n", r.into(c.eps.grid_n)}});
                 })},
                {"out", r.into(c.out)},
                {"seed", r.into(c.seed)},
            });
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string serialize_config(const ExperimentConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "v_f" << YAML::Value << c.model.v_f;
  e << YAML::Key << "rho_m" << YAML::Value << c.model.rho_m;
  e << YAML::Key << "gamma" << YAML::Value << c.model.gamma;
  e << YAML::Key << "tau" << YAML::Value << c.model.tau;
  e << YAML::Key << "length" << YAML::Value << c.model.length;
  e << YAML::EndMap;
  e << YAML::Key << "rho_star" << YAML::Value << c.rho_star;
  e << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "nx" << YAML::Value << c.sim.nx;
  e << YAML::Key << "t_end" << YAML::Value << c.sim.t_end;
  e << YAML::Key << "cfl" << YAML::Value << c.sim.cfl;
  e << YAML::Key << "record_every" << YAML::Value << c.sim.record_every;
  e << YAML::Key << "mode" << YAML::Value << (c.sim.mode == SimMode::nonlinear ? "nonlinear" : "linearized");
  e << YAML::Key << "amplitude" << YAML::Value << c.sim.amplitude;
  e << YAML::Key << "wavenumber" << YAML::Value << c.sim.wavenumber;
  e << YAML::EndMap;
  e << YAML::Key << "kernel_n" << YAML::Value << c.kernel_n;
  e << YAML::Key << "controller" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "type" << YAML::Value << c.controller.type;
  e << YAML::Key << "kp" << YAML::Value << c.controller.kp;
  e << YAML::Key << "ki" << YAML::Value << c.controller.ki;
  e << YAML::Key << "kernel_model" << YAML::Value << YAML::DoubleQuoted << c.controller.kernel_model;
  e << YAML::Key << "law_model" << YAML::Value << YAML::DoubleQuoted << c.controller.law_model;
  e << YAML::EndMap;
  e << YAML::Key << "compare" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "controllers" << YAML::Value << YAML::Flow << c.compare.controllers;
  e << YAML::Key << "timing_repeats" << YAML::Value << c.compare.timing_repeats;
  e << YAML::EndMap;
  e << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << (c.dataset.kind == OperatorKind::kernel ? "kernel" : "law");
  e << YAML::Key << "rho_min" << YAML::Value << c.dataset.rho_min;
  e << YAML::Key << "rho_max" << YAML::Value << c.dataset.rho_max;
  e << YAML::Key << "n_samples" << YAML::Value << c.dataset.n_samples;
  e << YAML::Key << "validation_fraction" << YAML::Value << c.dataset.validation_fraction;
  e << YAML::Key << "grid_n" << YAML::Value << c.dataset.grid_n;
  e << YAML::Key << "dir" << YAML::Value << YAML::DoubleQuoted << c.dataset.dir;
  e << YAML::EndMap;
  e << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "learning_rate" << YAML::Value << c.training.learning_rate;
  e << YAML::Key << "lr_decay" << YAML::Value << c.training.lr_decay;
  e << YAML::Key << "max_epochs" << YAML::Value << c.training.max_epochs;
  e << YAML::Key << "patience" << YAML::Value << c.training.patience;
  e << YAML::Key << "batch_points" << YAML::Value << c.training.batch_points;
  e << YAML::Key << "batch_instances" << YAML::Value << c.training.batch_instances;
  e << YAML::Key << "width" << YAML::Value << c.training.width;
  e << YAML::Key << "depth" << YAML::Value << c.training.depth;
  e << YAML::Key << "p" << YAML::Value << c.training.p;
  e << YAML::Key << "model_out" << YAML::Value << YAML::DoubleQuoted << c.training.model_out;
  e << YAML::EndMap;
  e << YAML::Key << "eps" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "model" << YAML::Value << YAML::DoubleQuoted << c.eps.model;
  e << YAML::Key << "n_lambda2" << YAML::Value << c.eps.n_lambda2;
  e << YAML::Key << "grid_n" << YAML::Value << c.eps.grid_n;
  e << YAML::EndMap;
  e << YAML::Key << "out" << YAML::Value << YAML::DoubleQuoted << c.out;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// Controllers

namespace {

std::shared_ptr<const DeepONet> load_shared(const std::string& path, OperatorKind kind) {
  return std::make_shared<const DeepONet>(load_model(path, kind));
}

// Records the wall time of every control() call of the wrapped controller.
class TimedController final : public BoundaryController {
 public:
  explicit TimedController(BoundaryController& inner) : inner_(inner) {}
  double control(const ControlContext& ctx) override {
    const auto t0 = std::chrono::steady_clock::now();
    const double u = inner_.control(ctx);
    samples.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return u;
  }
  [[nodiscard]] std::string name() const override { return inner_.name(); }
  std::vector<double> samples;

 private:
  BoundaryController& inner_;
};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::unique_ptr<BoundaryController> make_controller(const std::string& type, const ExperimentConfig& cfg) {
  const SimConfig sc = cfg.sim_config();
  const double lambda2 = sc.chars().lambda2;
  if (type == "backstepping") {
    return std::make_unique<BacksteppingController>(solve_kernels(sc.chars(), sc.params.length, cfg.kernel_n));
  }
  if (type == "no_kernels") {
    return std::make_unique<NoKernelController>(load_shared(cfg.controller.kernel_model, OperatorKind::kernel), lambda2);
  }
  if (type == "no_law") {
    return std::make_unique<NoLawController>(load_shared(cfg.controller.law_model, OperatorKind::law), lambda2);
  }
  if (type == "pi") return std::make_unique<PIController>(cfg.controller.kp, cfg.controller.ki);
  if (type == "open_loop") return std::make_unique<ZeroController>();
  throw ConfigError("unknown controller '" + type + "'");
}

std::vector<ControllerFactory> configured_factories(const ExperimentConfig& cfg,
                                                    std::shared_ptr<const DeepONet> kernel_model,
                                                    std::shared_ptr<const DeepONet> law_model) {
  const SimConfig sc = cfg.sim_config();
  const CharacteristicParams ch = sc.chars();
  const double length = sc.params.length;
  const int n = cfg.kernel_n;
  std::vector<ControllerFactory> out;
  // Backstepping first: it is the error baseline.
  std::vector<std::string> order{"backstepping"};
  for (const auto& c : cfg.compare.controllers) {
    if (c != "backstepping") order.push_back(c);
  }
  for (const auto& name : order) {
    if (name == "backstepping") {
      out.push_back({name, [ch, length, n] { return std::make_unique<BacksteppingController>(solve_kernels(ch, length, n)); }});
    } else if (name == "no_kernels") {
      if (!kernel_model) kernel_model = load_shared(cfg.controller.kernel_model, OperatorKind::kernel);
      out.push_back({name, [kernel_model, l2 = ch.lambda2] { return std::make_unique<NoKernelController>(kernel_model, l2); }});
    } else if (name == "no_law") {
      if (!law_model) law_model = load_shared(cfg.controller.law_model, OperatorKind::law);
      out.push_back({name, [law_model, l2 = ch.lambda2] { return std::make_unique<NoLawController>(law_model, l2); }});
    } else if (name == "pi") {
      out.push_back({name, [kp = cfg.controller.kp, ki = cfg.controller.ki] { return std::make_unique<PIController>(kp, ki); }});
    } else if (name == "open_loop") {
      out.push_back({name, [] { return std::make_unique<ZeroController>(); }});
    } else {
      throw ConfigError("unknown controller '" + name + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

double average_l2_error(const Trajectory& c, const Trajectory& bs, const Equilibrium& eq, double length) {
  if (c.size() != bs.size() || c.grid.size() != bs.grid.size()) {
    throw ShapeError("average_l2_error: trajectories have different record grids");
  }
  const double h = length / static_cast<double>(bs.grid.size());
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < bs.size(); ++k) {
    const Snapshot& a = c.snapshots[k];
    const Snapshot& b = bs.snapshots[k];
    for (std::size_t i = 0; i < b.rho.size(); ++i) {
      num += h * (std::pow(a.rho[i] - b.rho[i], 2) + std::pow(a.v[i] - b.v[i], 2));
      den += h * (std::pow(b.rho[i] - eq.rho_star, 2) + std::pow(b.v[i] - eq.v_star, 2));
    }
  }
  if (!(den > 0.0)) throw NumericsError("average_l2_error: baseline never leaves equilibrium");
  return std::sqrt(num / den);
}

double integrated_norm(const Trajectory& traj) {
  double total = 0.0;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    total += 0.5 * (traj.norm(k) + traj.norm(k - 1)) * (traj.time(k) - traj.time(k - 1));
  }
  return total;
}

const ControllerRow& ComparisonReport::row(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw ConfigError("comparison has no row for controller '" + name + "'");
}

ComparisonReport run_comparison(const ExperimentConfig& cfg, const std::vector<ControllerFactory>& factories) {
  if (factories.empty()) throw ConfigError("run_comparison: no controllers");
  const SimConfig sc = cfg.sim_config();
  const CharacteristicParams ch = sc.chars();
  const TrafficState initial = initial_condition(cfg.sim.amplitude, cfg.sim.wavenumber, sc);
  const std::vector<double> grid = cell_centers(sc.params.length, sc.nx);
  const RiemannState rs0 = to_riemann(initial.rho, initial.v, grid, sc.eq, ch, sc.params);

  ComparisonReport report;
  report.pi_kp = cfg.controller.kp;
  report.pi_ki = cfg.controller.ki;
  for (const auto& f : factories) {
    ControllerRow row;
    row.name = f.name;
    std::vector<double> cold;
    for (int rep = 0; rep < cfg.compare.timing_repeats; ++rep) {
      Diagnostics scratch;
      const auto t0 = std::chrono::steady_clock::now();
      auto c = f.make();
      volatile double u = c->control({0.0, 0.0, initial, rs0, ch, scratch});
      (void)u;
      cold.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    row.cold_start_time = median(cold);

    auto controller = f.make();
    TimedController timed(*controller);
    row.trajectory = simulate(sc, initial, timed);
    // The first call includes lazy synthesis, which the cold-start figure covers.
    if (timed.samples.size() > 1) timed.samples.erase(timed.samples.begin());
    row.step_time = median(timed.samples);
    row.initial_norm = row.trajectory.norm(0);
    row.final_norm = row.trajectory.norm(row.trajectory.size() - 1);
    row.warnings = row.trajectory.diag.warnings;
    report.rows.push_back(std::move(row));
  }
  const Trajectory& baseline = report.rows.front().trajectory;
  for (auto& r : report.rows) r.error = average_l2_error(r.trajectory, baseline, sc.eq, sc.params.length);
  return report;
}

PITuning tune_pi(const ExperimentConfig& cfg, int kp_steps, int ki_steps) {
  if (kp_steps < 2 || ki_steps < 2) throw ConfigError("tune_pi: need at least two values per gain");
  const SimConfig sc = cfg.sim_config();
  const TrafficState initial = initial_condition(cfg.sim.amplitude, cfg.sim.wavenumber, sc);
  PITuning best;
  best.cost = std::numeric_limits<double>::infinity();
  for (int a = 0; a < kp_steps; ++a) {
    const double kp = -2.0 + 4.0 * a / (kp_steps - 1);
    for (int b = 0; b < ki_steps; ++b) {
      const double ki = -0.05 + 0.1 * b / (ki_steps - 1);
      PIController pi(kp, ki);
      try {
        const double cost = integrated_norm(simulate(sc, initial, pi));
        if (cost < best.cost) best = {kp, ki, cost};
      } catch (const NumericsError&) {
        // Gains that drive the state out of range are simply not candidates.
      }
    }
  }
  if (!std::isfinite(best.cost)) throw NumericsError("tune_pi: no gain pair kept the state admissible");
  return best;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::ofstream open_csv(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw ModelIoError("cannot write " + path.string());
  os << std::setprecision(12);
  return os;
}

}  // namespace

void write_trajectory_csvs(const Trajectory& traj, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  auto state = open_csv(dir / (stem + "_state.csv"));
  state << "t,x,rho,v\n";
  for (const auto& s : traj.snapshots) {
    for (std::size_t i = 0; i < traj.grid.size(); ++i) {
      state << s.t << ',' << traj.grid[i] << ',' << per_m_to_per_km(s.rho[i]) << ',' << s.v[i] << '\n';
    }
  }
  auto control = open_csv(dir / (stem + "_control.csv"));
  control << "t,U\n";
  for (std::size_t k = 0; k < traj.size(); ++k) control << traj.time(k) << ',' << traj.control[k] << '\n';
  auto norm = open_csv(dir / (stem + "_norm.csv"));
  norm << "t,l2_w,l2_v,norm\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    norm << traj.time(k) << ',' << traj.l2_w[k] << ',' << traj.l2_v[k] << ',' << traj.norm(k) << '\n';
  }
}

void write_comparison_csv(const ComparisonReport& report, const fs::path& path) {
  auto os = open_csv(path);
  os << "controller,step_time_s,cold_start_time_s,avg_l2_error,initial_norm,final_norm\n";
  for (const auto& r : report.rows) {
    os << r.name << ',' << r.step_time << ',' << r.cold_start_time << ',' << r.error << ',' << r.initial_norm << ','
       << r.final_norm << '\n';
  }
}

void write_plot_script(const fs::path& dir, const std::vector<std::string>& stems) {
  std::ofstream os(dir / "plot.py");
  if (!os) throw ModelIoError("cannot write " + (dir / "plot.py").string());
  os << "#!/usr/bin/env python3\n"
        "# Renders the CSVs in this directory: python3 plot.py\n"
        "import os\n"
        "import matplotlib\n"
        "matplotlib.use(\"Agg\")\n"
        "import matplotlib.pyplot as plt\n"
        "import numpy as np\n"
        "import pandas as pd\n\n"
        "HERE = os.path.dirname(os.path.abspath(__file__))\n"
        "STEMS = [";
  for (std::size_t i = 0; i < stems.size(); ++i) os << (i ? ", " : "") << '"' << stems[i] << '"';
  os << "]\n\n"
        "def surface(stem, column, label):\n"
        "    df = pd.read_csv(os.path.join(HERE, f\"{stem}_state.csv\"))\n"
        "    t = np.sort(df.t.unique())\n"
        "    x = np.sort(df.x.unique())\n"
        "    z = df.pivot(index=\"t\", columns=\"x\", values=column).loc[t, x].to_numpy()\n"
        "    X, T = np.meshgrid(x, t)\n"
        "    fig = plt.figure(figsize=(6, 4.5))\n"
        "    ax = fig.add_subplot(projection=\"3d\")\n"
        "    ax.plot_surface(X, T, z, cmap=\"viridis\", linewidth=0)\n"
        "    ax.set_xlabel(\"x [m]\")\n"
        "    ax.set_ylabel(\"t [s]\")\n"
        "    ax.set_zlabel(label)\n"
        "    ax.set_title(stem)\n"
        "    fig.savefig(os.path.join(HERE, f\"{stem}_{column}.png\"), dpi=150, bbox_inches=\"tight\")\n"
        "    plt.close(fig)\n\n"
        "for stem in STEMS:\n"
        "    surface(stem, \"rho\", \"density [veh/km]\")\n"
        "    surface(stem, \"v\", \"speed [m/s]\")\n\n"
        "fig, (ax_u, ax_n) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)\n"
        "for stem in STEMS:\n"
        "    u = pd.read_csv(os.path.join(HERE, f\"{stem}_control.csv\"))\n"
        "    n = pd.read_csv(os.path.join(HERE, f\"{stem}_norm.csv\"))\n"
        "    ax_u.plot(u.t, u.U, label=stem)\n"
        "    ax_n.semilogy(n.t, n[\"norm\"], label=stem)\n"
        "ax_u.set_ylabel(\"U(t) [m/s]\")\n"
        "ax_n.set_ylabel(\"state norm\")\n"
        "ax_n.set_xlabel(\"t [s]\")\n"
        "ax_u.legend()\n"
        "fig.savefig(os.path.join(HERE, \"control_and_norm.png\"), dpi=150, bbox_inches=\"tight\")\n";
}

}  // namespace arz
