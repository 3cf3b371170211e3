#include "arz/traffic_model.hpp"

#include <cmath>
#include <sstream>

#include "arz/errors.hpp"

namespace arz {

void ModelParams::validate() const {
  auto require_positive = [](double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      std::ostringstream os;
      os << "model parameter '" << name << "' must be positive and finite, got " << value;
      throw ConfigError(os.str());
    }
  };
  require_positive(v_f, "v_f");
  require_positive(rho_m, "rho_m");
  require_positive(gamma, "gamma");
  require_positive(tau, "tau");
  require_positive(length, "length");
  if (gamma < 1.0) throw ConfigError("model parameter 'gamma' must be >= 1");
}

double CharacteristicParams::c(double x) const { return c_amp * std::exp(-c_decay * x); }

void RiemannState::validate() const {
  if (w.size() != grid.size() || v.size() != grid.size()) {
    throw ShapeError("RiemannState: w, v and grid must have equal length");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ShapeError("RiemannState: grid not strictly increasing");
  }
}

DiagramValue fundamental_diagram(double rho, const ModelParams& params) {
  if (!(rho >= 0.0 && rho <= params.rho_m)) {
    std::ostringstream os;
    os << "fundamental_diagram: density " << rho << " outside [0, " << params.rho_m << "]";
    throw DomainError(os.str());
  }
  const double ratio = rho / params.rho_m;
  const double speed = params.v_f * (1.0 - std::pow(ratio, params.gamma));
  const double slope =
      -params.v_f * params.gamma * std::pow(rho, params.gamma - 1.0) / std::pow(params.rho_m, params.gamma);
  return {speed, slope};
}

namespace {

double lambda2_at(double rho_star, const ModelParams& params) {
  const auto [speed, slope] = fundamental_diagram(rho_star, params);
  return -rho_star * slope - speed;
}

void require_congested(double rho_star, double lambda2, const ModelParams& params) {
  // Relative guard so that the regime boundary itself (λ₂ = 0 up to rounding) is rejected.
  if (lambda2 <= 1e-12 * params.v_f) {
    std::ostringstream os;
    os << "equilibrium density " << per_m_to_per_km(rho_star)
       << " veh/km is outside the congested regime: requires lambda2 = -rho*V'(rho*) - v* > 0, got "
       << lambda2 << " m/s";
    throw ConfigError(os.str());
  }
}

}  // namespace

Equilibrium equilibrium(double rho_star, const ModelParams& params) {
  params.validate();
  if (!(rho_star > 0.0 && rho_star < params.rho_m)) {
    std::ostringstream os;
    os << "equilibrium density " << rho_star << " veh/m outside (0, rho_m)";
    throw ConfigError(os.str());
  }
  require_congested(rho_star, lambda2_at(rho_star, params), params);
  const double v_star = fundamental_diagram(rho_star, params).speed;
  return {rho_star, v_star, rho_star * v_star};
}

CharacteristicParams characteristics(const Equilibrium& eq, const ModelParams& params) {
  const double slope = fundamental_diagram(eq.rho_star, params).slope;
  CharacteristicParams ch;
  ch.lambda1 = eq.v_star;
  ch.lambda2 = -eq.rho_star * slope - eq.v_star;
  require_congested(eq.rho_star, ch.lambda2, params);
  if (!(ch.lambda1 > 0.0)) throw ConfigError("characteristics: equilibrium speed must be positive");
  ch.r = ch.lambda2 / ch.lambda1;
  ch.c_amp = -1.0 / params.tau;
  ch.c_decay = 1.0 / (params.tau * eq.v_star);
  return ch;
}

Equilibrium equilibrium_for_lambda2(double lambda2, const ModelParams& params) {
  params.validate();
  const double ratio = std::pow((lambda2 / params.v_f + 1.0) / (params.gamma + 1.0), 1.0 / params.gamma);
  return equilibrium(params.rho_m * ratio, params);
}

RiemannState to_riemann(std::span<const double> rho, std::span<const double> v,
                        std::span<const double> grid, const Equilibrium& eq,
                        const CharacteristicParams& chars, const ModelParams& params) {
  if (rho.size() != grid.size() || v.size() != grid.size()) {
    throw ShapeError("to_riemann: density, velocity and grid must have equal length");
  }
  const double slope = fundamental_diagram(eq.rho_star, params).slope;
  RiemannState rs;
  rs.grid.assign(grid.begin(), grid.end());
  rs.w.resize(grid.size());
  rs.v.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double vt = v[i] - eq.v_star;
    const double rt = rho[i] - eq.rho_star;
    rs.v[i] = vt;
    rs.w[i] = std::exp(chars.c_decay * grid[i]) * (vt - slope * rt);
  }
  return rs;
}

PhysicalFields from_riemann(const RiemannState& rs, const Equilibrium& eq,
                            const CharacteristicParams& chars, const ModelParams& params) {
  rs.validate();
  const double slope = fundamental_diagram(eq.rho_star, params).slope;
  PhysicalFields out;
  out.rho.resize(rs.size());
  out.v.resize(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    out.v[i] = eq.v_star + rs.v[i];
    out.rho[i] = eq.rho_star + (rs.v[i] - std::exp(-chars.c_decay * rs.grid[i]) * rs.w[i]) / slope;
    if (!(out.rho[i] > 0.0 && out.rho[i] < params.rho_m)) ++out.out_of_range;
  }
  return out;
}

}  // namespace arz
