#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arz/deeponet.hpp"
#include "arz/kernel_solver.hpp"
#include "arz/simulator.hpp"

namespace arz {

// ---------------------------------------------------------------------------
// Control laws as pure functions

/// Kernels on the row x = L sampled at the state grid, ready for quadrature.
struct KernelRow {
  std::vector<double> grid;
  std::vector<double> kw;
  std::vector<double> kv;
  double lambda2 = 0.0;
  double length = 0.0;
};

/// Interpolates solver kernels at (L, ξ_k) for every state grid point ξ_k.
KernelRow kernel_row(const KernelPair& k, const std::vector<double>& grid);

/// Evaluates a kernel-operator model at (L, ξ_k). Flags extrapolation in `diag`.
KernelRow kernel_row(const DeepONet& model, double lambda2, const std::vector<double>& grid,
                     Diagnostics* diag = nullptr);

/// U = ∫₀ᴸ K^w(L,ξ) w̃ dξ + ∫₀ᴸ K^v(L,ξ) ṽ dξ on the cell-center grid.
double boundary_feedback(const RiemannState& rs, const KernelRow& row);

/// Backstepping law with solver kernels.
double backstepping_control(const RiemannState& rs, const KernelPair& k);

/// Same law with kernels synthesized by a kernel-operator model at λ₂.
double no_kernel_control(const RiemannState& rs, const DeepONet& model, double lambda2,
                         Diagnostics* diag = nullptr);

/// Control-law operator evaluated at time t; open loop in the state. Times past
/// the trained horizon are clamped to it with a warning.
double no_law_control(double t, const DeepONet& model, double lambda2, Diagnostics* diag = nullptr);

struct PIGains {
  double kp = 0.0;
  double ki = 0.0;
  double integral_state = 0.0;  // ∫(v(0,s) − v*) ds [m]
};

/// Perturbation-form PI law on the inlet speed error; advances the integral.
double pi_control(double v_inlet, double v_star, PIGains& gains, double dt);

// ---------------------------------------------------------------------------
// Controllers for the simulator

class BacksteppingController final : public BoundaryController {
 public:
  explicit BacksteppingController(KernelPair kernels);
  double control(const ControlContext& ctx) override;
  [[nodiscard]] std::string name() const override { return "backstepping"; }
  [[nodiscard]] const KernelPair& kernels() const { return kernels_; }

 private:
  KernelPair kernels_;
  std::optional<KernelRow> row_;
};

class NoKernelController final : public BoundaryController {
 public:
  NoKernelController(std::shared_ptr<const DeepONet> model, double lambda2);
  double control(const ControlContext& ctx) override;
  [[nodiscard]] std::string name() const override { return "no_kernels"; }

 private:
  std::shared_ptr<const DeepONet> model_;
  double lambda2_;
  std::optional<KernelRow> row_;
};

class NoLawController final : public BoundaryController {
 public:
  NoLawController(std::shared_ptr<const DeepONet> model, double lambda2);
  double control(const ControlContext& ctx) override;
  [[nodiscard]] std::string name() const override { return "no_law"; }

 private:
  std::shared_ptr<const DeepONet> model_;
  double lambda2_;
  Eigen::MatrixXd branch_;  // cached branch features at λ₂
};

/// Carries integral state: one instance per simulation.
class PIController final : public BoundaryController {
 public:
  PIController(double kp, double ki) : gains_{kp, ki, 0.0} {}
  double control(const ControlContext& ctx) override;
  [[nodiscard]] std::string name() const override { return "pi"; }
  [[nodiscard]] const PIGains& gains() const { return gains_; }

 private:
  PIGains gains_;
};

class ZeroController final : public BoundaryController {
 public:
  double control(const ControlContext&) override { return 0.0; }
  [[nodiscard]] std::string name() const override { return "open_loop"; }
};

// ---------------------------------------------------------------------------
// Diagnostics

struct TargetState {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> grid;
};

/// α = w̃, β(x) = ṽ(x) − ∫₀ˣ K^w(x,ξ)w̃ dξ − ∫₀ˣ K^v(x,ξ)ṽ dξ at every grid point.
TargetState target_transform(const RiemannState& rs, const KernelPair& k);

/// β at the outlet, given the outlet value of ṽ: ṽ(L) − ∫₀ᴸ K^w(L,ξ)w̃ − ∫₀ᴸ K^v(L,ξ)ṽ.
double target_beta_outlet(const RiemannState& rs, const KernelPair& k, double v_outlet);

struct LyapunovParams {
  double nu = 0.0;  // [1/s]
  double a = 0.0;

  /// ν = 0.5·min(λ₁, λ₂)/L, a = 2·max(1, r²).
  static LyapunovParams defaults(const CharacteristicParams& chars, double length);
  /// Throws ConfigError unless ν > 0 and a > r².
  void validate(const CharacteristicParams& chars) const;
};

/// V = ∫₀ᴸ e^{−νx/λ₁}/λ₁ α² + a e^{−νx/λ₂}/λ₂ β² dx.
double lyapunov_vk(const TargetState& ts, const LyapunovParams& lp, const CharacteristicParams& chars,
                   double length);

}  // namespace arz
