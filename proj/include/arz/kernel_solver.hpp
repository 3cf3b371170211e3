#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "arz/traffic_model.hpp"

namespace arz {

/// Square lattice restricted to the triangle 0 <= ξ <= x <= L.
/// Node (i, j), j <= i, sits at (x_i, ξ_j) = (i·h, j·h).
struct KernelGrid {
  int n = 0;
  double h = 0.0;
  double length = 0.0;

  KernelGrid() = default;
  KernelGrid(int nodes_per_side, double length);

  [[nodiscard]] std::size_t node_count() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(n + 1) / 2;
  }
  [[nodiscard]] std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(i + 1) / 2 +
           static_cast<std::size_t>(j);
  }
  [[nodiscard]] double coord(int i) const { return i * h; }
};

/// Gain kernels K^w, K^v on a KernelGrid, stored row by row (triangular packing).
struct KernelPair {
  KernelGrid grid;
  std::vector<double> kw;
  std::vector<double> kv;
  CharacteristicParams chars;

  [[nodiscard]] double kw_at(int i, int j) const { return kw[grid.index(i, j)]; }
  [[nodiscard]] double kv_at(int i, int j) const { return kv[grid.index(i, j)]; }
};

struct ResidualReport {
  double res_kw = 0.0;  // max |λ₂K^w_x − λ₁K^w_ξ − c(ξ)K^v|
  double res_kv = 0.0;  // max |λ₂K^v_x + λ₂K^v_ξ|
  double res_bc = 0.0;  // max violation of the diagonal and ξ = 0 conditions

  [[nodiscard]] double max() const;
};

/// Solves the backstepping kernel equations
///   λ₂K^w_x − λ₁K^w_ξ = c(ξ)K^v,  K^v_x + K^v_ξ = 0,
///   K^w(x,x) = −c(x)/(λ₁+λ₂),     K^v(x,0) = −K^w(x,0)
/// by marching along characteristics. K^v is constant on x − ξ = const, so it
/// equals −g(x−ξ) with g(x) = K^w(x,0). Tracing K^w back to the diagonal gives,
/// with Λ = λ₁+λ₂ and x₀ = (λ₁x + λ₂ξ)/Λ,
///   K^w(x,ξ) = −(1/Λ)[c(x₀) + ∫₀^{x−ξ} c(x₀ − λ₁u/Λ) g(u) du],
/// which at ξ = 0 is a Volterra equation for g. Trapezoid on the grid nodes;
/// the g(x) self-reference is resolved by fixed-point iteration (tol 1e-12).
///
/// Throws DomainError on invalid inputs and NumericsError if the inner
/// iteration fails to converge.
KernelPair solve_kernels(const CharacteristicParams& chars, double length, int n);

/// Finite-difference residual of the kernel equations. Central differences
/// inside 𝒯, one-sided at the edges; the two corner nodes (0,0) and (L,L),
/// where no in-domain stencil exists for one of the derivatives, are skipped.
ResidualReport kernel_residual(const KernelPair& k);

/// Scale λ-weighted kernel gradient, (λ₁+λ₂)·max|K|/L, used to normalize residuals.
double residual_scale(const KernelPair& k);

/// Relative residual tolerance a solved kernel must meet to be accepted as data.
inline constexpr double kKernelResidualTolerance = 1e-2;

/// First difference of a packed triangular field at node (i, j) along x
/// (axis 0) or ξ (axis 1): central where both neighbours are in 𝒯, one-sided
/// otherwise, nullopt if neither neighbour exists.
std::optional<double> grid_derivative(const KernelGrid& g, const std::vector<double>& f, int i, int j,
                                      int axis);

struct KernelValue {
  double kw;
  double kv;
};

/// Interpolated kernels at (x, ξ) ∈ 𝒯. Bilinear in interior lattice cells,
/// barycentric on the in-domain half of cells cut by the diagonal.
/// Throws DomainError outside 𝒯.
KernelValue eval_kernel(const KernelPair& k, double x, double xi);

/// CSV with header x,xi,kw,kv; one row per node in packing order.
void write_kernel_csv(const KernelPair& k, std::ostream& os);

}  // namespace arz
