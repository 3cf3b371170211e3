#pragma once

#include <span>
#include <vector>

namespace arz {

// Internal units are SI throughout: veh/m, m/s, s, m.

/// Physical constants of the ARZ road section.
struct ModelParams {
  double v_f = 40.0;     // free-flow speed [m/s]
  double rho_m = 0.16;   // jam density [veh/m]
  double gamma = 1.0;    // diagram exponent
  double tau = 60.0;     // relaxation time [s]
  double length = 500.0; // road length [m]

  /// Throws ConfigError if any field is non-positive or gamma < 1.
  void validate() const;
};

struct Equilibrium {
  double rho_star = 0.0;  // [veh/m]
  double v_star = 0.0;    // [m/s]
  double q_star = 0.0;    // [veh/s]
};

/// Data of the diagonalized linearization around an equilibrium.
struct CharacteristicParams {
  double lambda1 = 0.0;  // downstream speed of w̃ [m/s]
  double lambda2 = 0.0;  // upstream speed of ṽ [m/s]
  double r = 0.0;        // inlet reflection coefficient
  double c_amp = 0.0;    // −1/τ [1/s]
  double c_decay = 0.0;  // 1/(τ v*) [1/m]

  /// Source coefficient c(x) = c_amp · exp(−c_decay · x).
  [[nodiscard]] double c(double x) const;
};

/// w̃ and ṽ sampled on a grid of points in [0, L].
struct RiemannState {
  std::vector<double> w;
  std::vector<double> v;
  std::vector<double> grid;

  [[nodiscard]] std::size_t size() const { return grid.size(); }
  /// Throws ShapeError if lengths differ or grid is not strictly increasing.
  void validate() const;
};

struct DiagramValue {
  double speed;      // V(ρ)
  double slope;      // V'(ρ)
};

DiagramValue fundamental_diagram(double rho, const ModelParams& params);

/// Equilibrium at density rho_star. Rejects states outside the congested regime
/// (λ₂ ≤ 0), where outlet boundary control cannot act on the upstream wave.
Equilibrium equilibrium(double rho_star, const ModelParams& params);

CharacteristicParams characteristics(const Equilibrium& eq, const ModelParams& params);

/// Inverse of ρ* ↦ λ₂ for the γ-power diagram:
/// λ₂ = v_f((γ+1)(ρ*/ρ_m)^γ − 1)  ⇒  ρ* = ρ_m((λ₂/v_f + 1)/(γ+1))^{1/γ}.
Equilibrium equilibrium_for_lambda2(double lambda2, const ModelParams& params);

RiemannState to_riemann(std::span<const double> rho, std::span<const double> v,
                        std::span<const double> grid, const Equilibrium& eq,
                        const CharacteristicParams& chars, const ModelParams& params);

struct PhysicalFields {
  std::vector<double> rho;
  std::vector<double> v;
  /// Number of samples whose density left (0, ρ_m).
  std::size_t out_of_range = 0;
};

PhysicalFields from_riemann(const RiemannState& rs, const Equilibrium& eq,
                            const CharacteristicParams& chars, const ModelParams& params);

/// Unit conversion for the CLI and configs, which use veh/km.
constexpr double per_km_to_per_m(double per_km) { return per_km * 1e-3; }
constexpr double per_m_to_per_km(double per_m) { return per_m * 1e3; }

}  // namespace arz
