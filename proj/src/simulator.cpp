#include "arz/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "arz/errors.hpp"
#include "arz/grid.hpp"

namespace arz {

void SimConfig::validate() const {
  params.validate();
  if (nx < 10) throw ConfigError("sim.nx must be at least 10");
  if (!(cfl > 0.0 && cfl < 1.0)) throw ConfigError("sim.cfl must lie in (0, 1)");
  if (!(t_end > 0.0)) throw ConfigError("sim.t_end must be positive");
  if (!(record_every > 0.0)) throw ConfigError("sim.record_every must be positive");
  if (!(eq.rho_star > 0.0 && eq.v_star > 0.0)) throw ConfigError("sim: equilibrium not set");
}

void Diagnostics::warn(const std::string& message) {
  if (std::find(warnings.begin(), warnings.end(), message) == warnings.end()) {
    warnings.push_back(message);
  }
}

double Trajectory::norm(std::size_t k) const { return std::hypot(l2_w[k], l2_v[k]); }

std::size_t Trajectory::index_at(double time) const {
  for (std::size_t k = 0; k < snapshots.size(); ++k) {
    if (snapshots[k].t >= time - 1e-9) return k;
  }
  return snapshots.size() - 1;
}

PointState sinusoidal_profile(double x, double amplitude, int wavenumber, const Equilibrium& eq,
                              double length) {
  const double s = std::sin(wavenumber * std::numbers::pi * x / length);
  return {eq.rho_star * (1.0 + amplitude * s), eq.v_star * (1.0 - amplitude * s)};
}

TrafficState initial_condition(const std::function<PointState(double)>& profile,
                               const SimConfig& config) {
  config.validate();
  const auto grid = cell_centers(config.params.length, config.nx);
  TrafficState st;
  st.rho.resize(grid.size());
  st.v.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const PointState p = profile(grid[i]);
    if (!(p.rho > 0.0 && p.rho < config.params.rho_m) || !(p.v > 0.0)) {
      std::ostringstream os;
      os << "initial condition leaves the admissible range at x = " << grid[i] << " (rho = " << p.rho
         << ", v = " << p.v << ")";
      throw ConfigError(os.str());
    }
    st.rho[i] = p.rho;
    st.v[i] = p.v;
  }
  return st;
}

TrafficState initial_condition(double amplitude, int wavenumber, const SimConfig& config) {
  if (!(std::abs(amplitude) < 0.5)) throw ConfigError("initial amplitude must satisfy |A| < 0.5");
  const Equilibrium eq = config.eq;
  const double length = config.params.length;
  return initial_condition(
      [&](double x) { return sinusoidal_profile(x, amplitude, wavenumber, eq, length); }, config);
}

namespace {

struct Cons {
  double rho;
  double y;
};

struct CellFlux {
  double mass;
  double y;
};

double max_speed(double rho, double v, const ModelParams& p) {
  const auto fd = fundamental_diagram(rho, p);
  return std::max(std::abs(v), std::abs(v + rho * fd.slope));
}

CellFlux rusanov(double rho_l, double v_l, double rho_r, double v_r, const ModelParams& p) {
  const double y_l = rho_l * (v_l - fundamental_diagram(rho_l, p).speed);
  const double y_r = rho_r * (v_r - fundamental_diagram(rho_r, p).speed);
  const double a = std::max(max_speed(rho_l, v_l, p), max_speed(rho_r, v_r, p));
  return {0.5 * (rho_l * v_l + rho_r * v_r) - 0.5 * a * (rho_r - rho_l),
          0.5 * (y_l * v_l + y_r * v_r) - 0.5 * a * (y_r - y_l)};
}

void require_admissible(double rho, double v, std::size_t cell, double t, const ModelParams& p) {
  if (!(rho > 0.0 && rho < p.rho_m) || !(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << "state left the admissible range in cell " << cell << " at t = " << t << " s (rho = " << rho
       << " veh/m, v = " << v << " m/s)";
    throw NumericsError(os.str());
  }
}

StepResult step_nonlinear(const TrafficState& s, double control, double dt, const SimConfig& cfg) {
  const ModelParams& p = cfg.params;
  const std::size_t n = s.rho.size();
  const double h = cfg.h();

  const double v_in = s.v.front();
  const double rho_in = cfg.eq.q_star / v_in;
  require_admissible(rho_in, v_in, 0, s.t, p);
  const double rho_out = s.rho.back();
  const double v_out = 2.0 * (cfg.eq.v_star + control) - s.v.back();
  require_admissible(rho_out, v_out, n - 1, s.t, p);

  std::vector<CellFlux> face(n + 1);
  face[0] = rusanov(rho_in, v_in, s.rho[0], s.v[0], p);
  for (std::size_t i = 1; i < n; ++i) face[i] = rusanov(s.rho[i - 1], s.v[i - 1], s.rho[i], s.v[i], p);
  face[n] = rusanov(s.rho[n - 1], s.v[n - 1], rho_out, v_out, p);

  StepResult out;
  out.inflow = face[0].mass;
  out.outflow = face[n].mass;
  out.state.t = s.t + dt;
  out.state.rho.resize(n);
  out.state.v.resize(n);
  const double ratio = dt / h;
  const double relax = dt / p.tau;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = s.rho[i] * (s.v[i] - fundamental_diagram(s.rho[i], p).speed);
    const double rho_new = s.rho[i] - ratio * (face[i + 1].mass - face[i].mass);
    double y_new = y - ratio * (face[i + 1].y - face[i].y);
    y_new -= relax * y_new;
    if (!(rho_new > 0.0 && rho_new < p.rho_m)) require_admissible(rho_new, 1.0, i, out.state.t, p);
    const double v_new = y_new / rho_new + fundamental_diagram(rho_new, p).speed;
    require_admissible(rho_new, v_new, i, out.state.t, p);
    out.state.rho[i] = rho_new;
    out.state.v[i] = v_new;
  }
  return out;
}

StepResult step_linearized(const TrafficState& s, double control, double dt, const SimConfig& cfg) {
  const ModelParams& p = cfg.params;
  const auto ch = cfg.chars();
  const auto grid = cell_centers(p.length, cfg.nx);
  const RiemannState rs = to_riemann(s.rho, s.v, grid, cfg.eq, ch, p);
  const std::size_t n = grid.size();
  const double a1 = ch.lambda1 * dt / cfg.h();
  const double a2 = ch.lambda2 * dt / cfg.h();

  RiemannState next = rs;
  const double w_inlet = -ch.r * rs.v.front();
  for (std::size_t i = 0; i < n; ++i) {
    const double w_left = (i == 0) ? w_inlet : rs.w[i - 1];
    const double v_right = (i + 1 == n) ? control : rs.v[i + 1];
    next.w[i] = rs.w[i] - a1 * (rs.w[i] - w_left);
    next.v[i] = rs.v[i] + a2 * (v_right - rs.v[i]) + dt * ch.c(grid[i]) * rs.w[i];
  }
  const PhysicalFields phys = from_riemann(next, cfg.eq, ch, p);

  StepResult out;
  out.state.t = s.t + dt;
  out.state.rho = phys.rho;
  out.state.v = phys.v;
  for (std::size_t i = 0; i < n; ++i) require_admissible(out.state.rho[i], out.state.v[i], i, out.state.t, p);
  // Linearized mass fluxes ρv ≈ q* + v*ρ̃ + ρ*ṽ at the faces, using boundary values.
  const double slope = fundamental_diagram(cfg.eq.rho_star, p).slope;
  auto mass_flux = [&](double w, double v, double x) {
    const double rho_t = (v - std::exp(-ch.c_decay * x) * w) / slope;
    return cfg.eq.q_star + cfg.eq.v_star * rho_t + cfg.eq.rho_star * v;
  };
  out.inflow = mass_flux(w_inlet, rs.v.front(), 0.0);
  out.outflow = mass_flux(rs.w.back(), control, p.length);
  return out;
}

}  // namespace

double cfl_dt(const TrafficState& state, const SimConfig& config) {
  double speed = 0.0;
  if (config.mode == SimMode::linearized) {
    const auto ch = config.chars();
    speed = std::max(ch.lambda1, ch.lambda2);
  } else {
    for (std::size_t i = 0; i < state.rho.size(); ++i) {
      speed = std::max(speed, max_speed(state.rho[i], state.v[i], config.params));
    }
  }
  if (!(speed > 0.0)) throw NumericsError("cfl_dt: all characteristic speeds vanish");
  return config.cfl * config.h() / speed;
}

StepResult step(const TrafficState& state, double control, double dt, const SimConfig& config) {
  if (state.rho.size() != static_cast<std::size_t>(config.nx) || state.v.size() != state.rho.size()) {
    throw ShapeError("step: state does not match sim.nx");
  }
  if (!(dt > 0.0)) throw NumericsError("step: dt must be positive");
  const double limit = cfl_dt(state, config);
  if (dt > limit * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "step: dt = " << dt << " s violates the CFL limit " << limit << " s at t = " << state.t;
    throw NumericsError(os.str());
  }
  return config.mode == SimMode::nonlinear ? step_nonlinear(state, control, dt, config)
                                           : step_linearized(state, control, dt, config);
}

Trajectory simulate(const SimConfig& config, const TrafficState& initial,
                    BoundaryController& controller) {
  config.validate();
  const auto ch = config.chars();
  Trajectory traj;
  traj.grid = cell_centers(config.params.length, config.nx);

  TrafficState state = initial;
  state.t = 0.0;
  std::size_t record_index = 0;
  double next_record = 0.0;

  while (true) {
    const RiemannState rs = to_riemann(state.rho, state.v, traj.grid, config.eq, ch, config.params);
    const bool finished = state.t >= config.t_end - 1e-9;
    const bool record = finished || state.t >= next_record - 1e-9;
    if (record) {
      traj.snapshots.push_back({state.t, state.rho, state.v});
      traj.l2_w.push_back(l2_norm_cells(rs.w, config.params.length));
      traj.l2_v.push_back(l2_norm_cells(rs.v, config.params.length));
      ++record_index;
      next_record = std::min(record_index * config.record_every, config.t_end);
    }
    if (finished) {
      traj.control.push_back(controller.control({state.t, 0.0, state, rs, ch, traj.diag}));
      break;
    }

    double dt = cfl_dt(state, config);
    bool lands_on_record = false;
    if (state.t + dt >= next_record - 1e-9) {
      dt = std::min(dt, next_record - state.t);
      lands_on_record = true;
    }
    const double u = controller.control({state.t, dt, state, rs, ch, traj.diag});
    if (record) traj.control.push_back(u);

    try {
      StepResult res = step(state, u, dt, config);
      state = std::move(res.state);
    } catch (const NumericsError& e) {
      std::ostringstream os;
      os << "simulate (" << controller.name() << ", t = " << state.t << " s): " << e.what();
      throw NumericsError(os.str());
    }
    if (lands_on_record) state.t = next_record;
    ++traj.steps;
  }
  return traj;
}

double vehicle_count(const TrafficState& state, double length) {
  return integrate_cells(state.rho, length);
}

}  // namespace arz
