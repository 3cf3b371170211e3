#include "arz/kernel_solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "arz/errors.hpp"

namespace arz {

namespace {

constexpr double kFixedPointTol = 1e-12;
constexpr int kFixedPointMaxIter = 50;

}  // namespace

KernelGrid::KernelGrid(int nodes_per_side, double len) : n(nodes_per_side), length(len) {
  if (n < 3) throw DomainError("KernelGrid: need at least 3 nodes per side");
  if (!(len > 0.0)) throw DomainError("KernelGrid: length must be positive");
  h = len / (n - 1);
}

double ResidualReport::max() const { return std::max({res_kw, res_kv, res_bc}); }

KernelPair solve_kernels(const CharacteristicParams& chars, double length, int n) {
  if (!(chars.lambda1 > 0.0) || !(chars.lambda2 > 0.0)) {
    throw DomainError("solve_kernels: characteristic speeds must be positive");
  }
  KernelPair k;
  k.grid = KernelGrid(n, length);
  k.chars = chars;
  k.kw.assign(k.grid.node_count(), 0.0);
  k.kv.assign(k.grid.node_count(), 0.0);

  const double h = k.grid.h;
  const double lam = chars.lambda1 + chars.lambda2;
  const double l1 = chars.lambda1 / lam;
  const double l2 = chars.lambda2 / lam;

  // Bottom trace g_i = K^w(x_i, 0).
  std::vector<double> g(static_cast<std::size_t>(n));
  g[0] = -chars.c(0.0) / lam;
  for (int i = 1; i < n; ++i) {
    const double x = k.grid.coord(i);
    double known = chars.c(l1 * x);
    for (int m = 0; m < i; ++m) {
      const double weight = (m == 0) ? 0.5 * h : h;
      known += weight * chars.c(l1 * (x - m * h)) * g[static_cast<std::size_t>(m)];
    }
    const double self = 0.5 * h * chars.c(0.0);
    double gi = g[static_cast<std::size_t>(i - 1)];
    double delta = 0.0;
    int iter = 0;
    for (; iter < kFixedPointMaxIter; ++iter) {
      const double next = -(known + self * gi) / lam;
      delta = std::abs(next - gi);
      gi = next;
      if (delta <= kFixedPointTol * std::abs(gi) || delta == 0.0) break;
    }
    if (iter == kFixedPointMaxIter || !std::isfinite(gi)) {
      std::ostringstream os;
      os << "solve_kernels: fixed-point iteration did not converge at x = " << x
         << " (last update " << delta << ")";
      throw NumericsError(os.str());
    }
    g[static_cast<std::size_t>(i)] = gi;
  }

  for (int i = 0; i < n; ++i) {
    const double x = k.grid.coord(i);
    for (int j = 0; j <= i; ++j) {
      const std::size_t idx = k.grid.index(i, j);
      const int span = i - j;
      k.kv[idx] = -g[static_cast<std::size_t>(span)];
      if (j == 0) {
        k.kw[idx] = g[static_cast<std::size_t>(i)];
        continue;
      }
      if (span == 0) {
        k.kw[idx] = -chars.c(x) / lam;
        continue;
      }
      const double x0 = l1 * x + l2 * k.grid.coord(j);
      double acc = chars.c(x0);
      for (int m = 0; m <= span; ++m) {
        const double weight = (m == 0 || m == span) ? 0.5 * h : h;
        acc += weight * chars.c(x0 - l1 * m * h) * g[static_cast<std::size_t>(m)];
      }
      k.kw[idx] = -acc / lam;
    }
  }
  return k;
}

std::optional<double> grid_derivative(const KernelGrid& g, const std::vector<double>& f, int i, int j,
                                      int axis) {
  auto inside = [&](int a, int b) { return a >= 0 && a < g.n && b >= 0 && b <= a; };
  const int di = axis == 0 ? 1 : 0;
  const int dj = axis == 0 ? 0 : 1;
  const bool fwd = inside(i + di, j + dj);
  const bool bwd = inside(i - di, j - dj);
  if (fwd && bwd) return (f[g.index(i + di, j + dj)] - f[g.index(i - di, j - dj)]) / (2.0 * g.h);
  if (fwd) return (f[g.index(i + di, j + dj)] - f[g.index(i, j)]) / g.h;
  if (bwd) return (f[g.index(i, j)] - f[g.index(i - di, j - dj)]) / g.h;
  return std::nullopt;
}

double residual_scale(const KernelPair& k) {
  double peak = 0.0;
  for (double v : k.kw) peak = std::max(peak, std::abs(v));
  for (double v : k.kv) peak = std::max(peak, std::abs(v));
  return (k.chars.lambda1 + k.chars.lambda2) * peak / k.grid.length;
}

ResidualReport kernel_residual(const KernelPair& k) {
  const KernelGrid& g = k.grid;
  const auto& ch = k.chars;
  const double lam = ch.lambda1 + ch.lambda2;
  ResidualReport rep;
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const auto wx = grid_derivative(g, k.kw, i, j, 0);
      const auto wxi = grid_derivative(g, k.kw, i, j, 1);
      const auto vx = grid_derivative(g, k.kv, i, j, 0);
      const auto vxi = grid_derivative(g, k.kv, i, j, 1);
      if (!wx || !wxi || !vx || !vxi) continue;
      const double xi = g.coord(j);
      const double r1 = ch.lambda2 * *wx - ch.lambda1 * *wxi - ch.c(xi) * k.kv_at(i, j);
      const double r2 = ch.lambda2 * *vx + ch.lambda2 * *vxi;
      rep.res_kw = std::max(rep.res_kw, std::abs(r1));
      rep.res_kv = std::max(rep.res_kv, std::abs(r2));
    }
  }
  for (int i = 0; i < g.n; ++i) {
    const double diag = std::abs(k.kw_at(i, i) + ch.c(g.coord(i)) / lam);
    const double edge = std::abs(k.kv_at(i, 0) + k.kw_at(i, 0));
    rep.res_bc = std::max({rep.res_bc, diag, edge});
  }
  return rep;
}

KernelValue eval_kernel(const KernelPair& k, double x, double xi) {
  const KernelGrid& g = k.grid;
  const double tol = 1e-12 * g.length;
  if (!(xi >= -tol && xi <= x + tol && x <= g.length + tol)) {
    std::ostringstream os;
    os << "eval_kernel: (" << x << ", " << xi << ") outside the triangle 0 <= xi <= x <= "
       << g.length;
    throw DomainError(os.str());
  }
  x = std::clamp(x, 0.0, g.length);
  xi = std::clamp(xi, 0.0, x);

  const double sx = x / g.h;
  const double sxi = xi / g.h;
  const int i = std::min(static_cast<int>(sx), g.n - 2);
  const int j = std::min(static_cast<int>(sxi), i);
  const double s = sx - i;
  const double t = (j < i) ? sxi - j : std::min(sxi - j, s);

  auto interp = [&](const std::vector<double>& f) {
    if (j < i) {
      const double f00 = f[g.index(i, j)];
      const double f10 = f[g.index(i + 1, j)];
      const double f01 = f[g.index(i, j + 1)];
      const double f11 = f[g.index(i + 1, j + 1)];
      return (1 - s) * (1 - t) * f00 + s * (1 - t) * f10 + (1 - s) * t * f01 + s * t * f11;
    }
    const double fa = f[g.index(i, i)];
    const double fb = f[g.index(i + 1, i)];
    const double fc = f[g.index(i + 1, i + 1)];
    return fa + s * (fb - fa) + t * (fc - fb);
  };
  return {interp(k.kw), interp(k.kv)};
}

void write_kernel_csv(const KernelPair& k, std::ostream& os) {
  os << "x,xi,kw,kv\n" << std::setprecision(17);
  for (int i = 0; i < k.grid.n; ++i) {
    for (int j = 0; j <= i; ++j) {
      os << k.grid.coord(i) << ',' << k.grid.coord(j) << ',' << k.kw_at(i, j) << ','
         << k.kv_at(i, j) << '\n';
    }
  }
}

}  // namespace arz
