#include "arz/control.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "arz/errors.hpp"
#include "arz/grid.hpp"

namespace arz {

namespace {

void require_matching_lambda2(double expected, double actual, const char* who) {
  if (std::abs(expected - actual) > 1e-9 * std::max(1.0, std::abs(actual))) {
    std::ostringstream os;
    os << who << ": kernels were built for lambda2 = " << expected
       << " m/s but the plant linearization has lambda2 = " << actual << " m/s";
    throw ConfigError(os.str());
  }
}

void require_length(double kernel_length, const std::vector<double>& grid) {
  if (!grid.empty() && grid.back() > kernel_length * (1.0 + 1e-12)) {
    throw ConfigError("control: state grid extends beyond the kernel domain");
  }
}

}  // namespace

KernelRow kernel_row(const KernelPair& k, const std::vector<double>& grid) {
  require_length(k.grid.length, grid);
  KernelRow row;
  row.grid = grid;
  row.lambda2 = k.chars.lambda2;
  row.length = k.grid.length;
  row.kw.resize(grid.size());
  row.kv.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const KernelValue kv = eval_kernel(k, k.grid.length, grid[i]);
    row.kw[i] = kv.kw;
    row.kv[i] = kv.kv;
  }
  return row;
}

KernelRow kernel_row(const DeepONet& model, double lambda2, const std::vector<double>& grid, Diagnostics* diag) {
  if (model.kind != OperatorKind::kernel) throw ConfigError("no_kernels controller needs a kernel-operator model");
  require_length(model.length, grid);
  Eigen::MatrixXd points(2, static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    points(0, static_cast<Eigen::Index>(i)) = model.length;
    points(1, static_cast<Eigen::Index>(i)) = grid[i];
  }
  OperatorPrediction pred = deeponet_eval(model, lambda2, points);
  if (pred.extrapolated && diag != nullptr) {
    std::ostringstream os;
    os << "lambda2 = " << lambda2 << " m/s is outside the kernel model's trained range [" << model.sensor.lo
       << ", " << model.sensor.hi << "]; kernels are extrapolated";
    diag->warn(os.str());
  }
  KernelRow row;
  row.grid = grid;
  row.lambda2 = lambda2;
  row.length = model.length;
  row.kw = std::move(pred.heads[0]);
  row.kv = std::move(pred.heads[1]);
  return row;
}

double boundary_feedback(const RiemannState& rs, const KernelRow& row) {
  if (rs.size() != row.grid.size()) throw ShapeError("boundary_feedback: state and kernel row differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) sum += row.kw[i] * rs.w[i] + row.kv[i] * rs.v[i];
  return sum * row.length / static_cast<double>(rs.size());
}

double backstepping_control(const RiemannState& rs, const KernelPair& k) {
  rs.validate();
  return boundary_feedback(rs, kernel_row(k, rs.grid));
}

double no_kernel_control(const RiemannState& rs, const DeepONet& model, double lambda2, Diagnostics* diag) {
  rs.validate();
  return boundary_feedback(rs, kernel_row(model, lambda2, rs.grid, diag));
}

double no_law_control(double t, const DeepONet& model, double lambda2, Diagnostics* diag) {
  if (model.kind != OperatorKind::law) throw ConfigError("no_law controller needs a law-operator model");
  if (diag != nullptr && !model.in_trained_range(lambda2)) {
    diag->warn("lambda2 outside the law model's trained range; control is extrapolated");
  }
  if (t > model.horizon) {
    if (diag != nullptr) diag->warn("time beyond the law model's trained horizon; clamped to T");
    t = model.horizon;
  }
  Eigen::MatrixXd point(1, 1);
  point(0, 0) = std::max(t, 0.0);
  return deeponet_eval(model, lambda2, point).heads[0][0];
}

double pi_control(double v_inlet, double v_star, PIGains& gains, double dt) {
  if (!(dt > 0.0)) throw DomainError("pi_control: dt must be positive");
  const double error = v_inlet - v_star;
  gains.integral_state += error * dt;
  return gains.kp * error + gains.ki * gains.integral_state;
}

// ---------------------------------------------------------------------------

BacksteppingController::BacksteppingController(KernelPair kernels) : kernels_(std::move(kernels)) {}

double BacksteppingController::control(const ControlContext& ctx) {
  require_matching_lambda2(kernels_.chars.lambda2, ctx.chars.lambda2, "backstepping controller");
  if (!row_ || row_->grid.size() != ctx.riemann.size()) row_ = kernel_row(kernels_, ctx.riemann.grid);
  return boundary_feedback(ctx.riemann, *row_);
}

NoKernelController::NoKernelController(std::shared_ptr<const DeepONet> model, double lambda2)
    : model_(std::move(model)), lambda2_(lambda2) {
  if (!model_) throw ConfigError("no_kernels controller: missing model");
}

double NoKernelController::control(const ControlContext& ctx) {
  require_matching_lambda2(lambda2_, ctx.chars.lambda2, "no_kernels controller");
  if (!row_ || row_->grid.size() != ctx.riemann.size()) {
    row_ = kernel_row(*model_, lambda2_, ctx.riemann.grid, &ctx.diag);
  }
  return boundary_feedback(ctx.riemann, *row_);
}

NoLawController::NoLawController(std::shared_ptr<const DeepONet> model, double lambda2)
    : model_(std::move(model)), lambda2_(lambda2) {
  if (!model_) throw ConfigError("no_law controller: missing model");
  if (model_->kind != OperatorKind::law) throw ConfigError("no_law controller needs a law-operator model");
}

double NoLawController::control(const ControlContext& ctx) {
  require_matching_lambda2(lambda2_, ctx.chars.lambda2, "no_law controller");
  if (branch_.size() == 0) {
    if (!model_->in_trained_range(lambda2_)) {
      ctx.diag.warn("lambda2 outside the law model's trained range; control is extrapolated");
    }
    const double l2[1] = {lambda2_};
    branch_ = model_->branch_features(l2);
  }
  double t = ctx.t;
  if (t > model_->horizon) {
    ctx.diag.warn("time beyond the law model's trained horizon; clamped to T");
    t = model_->horizon;
  }
  Eigen::MatrixXd point(1, 1);
  point(0, 0) = std::max(t, 0.0);
  const Eigen::MatrixXd pred = DeepONet::combine(branch_, model_->trunk_features(point), 0, model_->p);
  return model_->outputs[0].mean + model_->outputs[0].scale * pred(0, 0);
}

double PIController::control(const ControlContext& ctx) {
  const double v_in = ctx.state.v.front();
  const double v_star = v_in - ctx.riemann.v.front();
  if (ctx.dt > 0.0) return pi_control(v_in, v_star, gains_, ctx.dt);
  // Final sample: report the law without advancing the integrator.
  return gains_.kp * (v_in - v_star) + gains_.ki * gains_.integral_state;
}

// ---------------------------------------------------------------------------

TargetState target_transform(const RiemannState& rs, const KernelPair& k) {
  rs.validate();
  require_length(k.grid.length, rs.grid);
  const std::size_t n = rs.size();
  TargetState ts;
  ts.grid = rs.grid;
  ts.alpha = rs.w;
  ts.beta.resize(n);
  std::vector<double> integrand(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const KernelValue kv = eval_kernel(k, rs.grid[i], rs.grid[j]);
      integrand[j] = kv.kw * rs.w[j] + kv.kv * rs.v[j];
    }
    ts.beta[i] = rs.v[i] - integrate_cells_prefix(integrand, rs.grid, i);
  }
  return ts;
}

double target_beta_outlet(const RiemannState& rs, const KernelPair& k, double v_outlet) {
  return v_outlet - backstepping_control(rs, k);
}

LyapunovParams LyapunovParams::defaults(const CharacteristicParams& chars, double length) {
  return {0.5 * std::min(chars.lambda1, chars.lambda2) / length, 2.0 * std::max(1.0, chars.r * chars.r)};
}

void LyapunovParams::validate(const CharacteristicParams& chars) const {
  if (!(nu > 0.0)) throw ConfigError("Lyapunov weight nu must be positive");
  if (!(a > chars.r * chars.r)) throw ConfigError("Lyapunov weight a must exceed r^2");
}

double lyapunov_vk(const TargetState& ts, const LyapunovParams& lp, const CharacteristicParams& chars,
                   double length) {
  if (ts.alpha.size() != ts.grid.size() || ts.beta.size() != ts.grid.size()) {
    throw ShapeError("lyapunov_vk: target state fields differ in length");
  }
  std::vector<double> density(ts.grid.size());
  for (std::size_t i = 0; i < ts.grid.size(); ++i) {
    const double x = ts.grid[i];
    density[i] = std::exp(-lp.nu * x / chars.lambda1) / chars.lambda1 * ts.alpha[i] * ts.alpha[i] +
                 lp.a * std::exp(-lp.nu * x / chars.lambda2) / chars.lambda2 * ts.beta[i] * ts.beta[i];
  }
  return integrate_cells(density, length);
}

}  // namespace arz
