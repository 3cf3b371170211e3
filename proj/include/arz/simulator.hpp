#pragma once

#include <functional>
#include <string>
#include <vector>

#include "arz/traffic_model.hpp"

namespace arz {

enum class SimMode { nonlinear, linearized };

struct SimConfig {
  ModelParams params;
  Equilibrium eq;
  int nx = 100;
  double t_end = 300.0;
  double cfl = 0.8;
  SimMode mode = SimMode::nonlinear;
  double record_every = 1.0;  // simulated seconds between snapshots

  /// Throws ConfigError on nx < 10, cfl outside (0, 1), or non-positive horizons.
  void validate() const;
  [[nodiscard]] double h() const { return params.length / nx; }
  [[nodiscard]] CharacteristicParams chars() const { return characteristics(eq, params); }
};

/// Cell-average density and velocity on the cell-center grid.
struct TrafficState {
  std::vector<double> rho;
  std::vector<double> v;
  double t = 0.0;
};

/// Collects non-fatal warnings (deduplicated) raised during a run.
struct Diagnostics {
  std::vector<std::string> warnings;
  void warn(const std::string& message);
};

struct ControlContext {
  double t;
  double dt;  // step about to be taken; 0 for the final sample, which is not integrated
  const TrafficState& state;
  const RiemannState& riemann;
  const CharacteristicParams& chars;  // linearization the simulator runs at
  Diagnostics& diag;
};

/// Outlet boundary controller: returns U(t) so that v(L,t) = v* + U(t).
class BoundaryController {
 public:
  virtual ~BoundaryController() = default;
  virtual double control(const ControlContext& ctx) = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

struct Snapshot {
  double t = 0.0;
  std::vector<double> rho;
  std::vector<double> v;
};

/// Recorded run. snapshots, control and norms share the same clock.
struct Trajectory {
  std::vector<double> grid;
  std::vector<Snapshot> snapshots;
  std::vector<double> control;
  std::vector<double> l2_w;
  std::vector<double> l2_v;
  std::size_t steps = 0;
  Diagnostics diag;

  [[nodiscard]] std::size_t size() const { return snapshots.size(); }
  [[nodiscard]] double time(std::size_t k) const { return snapshots[k].t; }
  /// ‖(w̃, ṽ)‖_{L2} at snapshot k.
  [[nodiscard]] double norm(std::size_t k) const;
  /// Index of the first snapshot with t >= time.
  [[nodiscard]] std::size_t index_at(double time) const;
};

/// ρ(x,0) = ρ*(1 + A sin(kπx/L)), v(x,0) = v*(1 − A sin(kπx/L)) at a single point.
struct PointState {
  double rho;
  double v;
};
PointState sinusoidal_profile(double x, double amplitude, int wavenumber, const Equilibrium& eq,
                              double length);

/// Sinusoidal stop-and-go initial state sampled at cell centers.
/// Throws ConfigError if |A| >= 0.5 or the density leaves (0, ρ_m).
TrafficState initial_condition(double amplitude, int wavenumber, const SimConfig& config);

/// Arbitrary initial profile sampled at cell centers, validated like the sinusoidal one.
TrafficState initial_condition(const std::function<PointState(double)>& profile,
                               const SimConfig& config);

/// Largest stable explicit step: cfl·h / max characteristic speed.
double cfl_dt(const TrafficState& state, const SimConfig& config);

struct StepResult {
  TrafficState state;
  double inflow = 0.0;   // numerical mass flux through x = 0 [veh/s]
  double outflow = 0.0;  // numerical mass flux through x = L [veh/s]
};

/// One explicit step under outlet control U.
///
/// Nonlinear mode: Rusanov finite volume on (ρ, y = ρ(v − V(ρ))), then the
/// relaxation −y/τ by explicit splitting. The inlet ghost copies v from cell 0
/// and sets ρ = q*/v; the outlet ghost copies ρ and reflects v so the face
/// average equals v* + U.
///
/// Linearized mode: first-order upwinding of (w̃, ṽ) with source c(x)w̃ and
/// boundary values w̃(0) = −rṽ(0), ṽ(L) = U.
///
/// Throws NumericsError on CFL violation or when a cell leaves 0 < ρ < ρ_m, v > 0.
StepResult step(const TrafficState& state, double control, double dt, const SimConfig& config);

/// Marches from `initial` to config.t_end, recording every config.record_every seconds.
Trajectory simulate(const SimConfig& config, const TrafficState& initial,
                    BoundaryController& controller);

/// Total vehicle count ∫ρ dx.
double vehicle_count(const TrafficState& state, double length);

}  // namespace arz
