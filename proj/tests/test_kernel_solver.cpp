#include <doctest.h>

#include <chrono>
#include <cmath>
#include <sstream>
#include <tuple>

#include "arz/errors.hpp"
#include "arz/kernel_solver.hpp"

using namespace arz;

namespace {

CharacteristicParams default_chars() {
  const ModelParams p;
  return characteristics(equilibrium(0.12, p), p);
}

// With c ≡ c0 the kernel equations have the closed form
// K^w = −(c0/Λ)e^{−c0(x−ξ)/Λ}, K^v = −K^w.
double constant_source_kw(double c0, double lambda, double x, double xi) {
  return -(c0 / lambda) * std::exp(-c0 * (x - xi) / lambda);
}

double max_abs_error_vs_closed_form(int n) {
  CharacteristicParams ch{10.0, 20.0, 2.0, -1.0 / 60.0, 0.0};
  const KernelPair k = solve_kernels(ch, 500.0, n);
  double err = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double ref = constant_source_kw(ch.c_amp, 30.0, k.grid.coord(i), k.grid.coord(j));
      err = std::max(err, std::abs(k.kw_at(i, j) - ref));
      err = std::max(err, std::abs(k.kv_at(i, j) + ref));
    }
  }
  return err;
}

}  // namespace

TEST_SUITE("kernel_solver") {
  TEST_CASE("corner value and boundary conditions hold at nodes") {
    const auto ch = default_chars();
    const KernelPair k = solve_kernels(ch, 500.0, 101);
    CHECK(k.kw_at(0, 0) == doctest::Approx(1.0 / 1800.0).epsilon(1e-14));
    for (int i = 0; i < k.grid.n; ++i) {
      const double x = k.grid.coord(i);
      CHECK(k.kw_at(i, i) == doctest::Approx(-ch.c(x) / 30.0).epsilon(1e-14));
      CHECK(k.kv_at(i, 0) == -k.kw_at(i, 0));
    }
  }

  TEST_CASE("K^v is constant along x - xi = const") {
    const KernelPair k = solve_kernels(default_chars(), 500.0, 51);
    for (int i = 0; i < k.grid.n; ++i) {
      for (int j = 0; j <= i; ++j) CHECK(k.kv_at(i, j) == k.kv_at(i - j, 0));
    }
  }

  TEST_CASE("constant source matches the closed-form kernels with second-order error") {
    const double e1 = max_abs_error_vs_closed_form(51);
    const double e2 = max_abs_error_vs_closed_form(101);
    CHECK(e1 < 1e-8);
    CHECK(e2 < e1 / 3.0);
  }

  TEST_CASE("zero source gives zero kernels and zero residuals") {
    CharacteristicParams ch{10.0, 20.0, 2.0, 0.0, 1.0 / 600.0};
    const KernelPair k = solve_kernels(ch, 500.0, 21);
    for (double v : k.kw) CHECK(v == 0.0);
    for (double v : k.kv) CHECK(v == 0.0);
    const auto res = kernel_residual(k);
    CHECK(res.res_kw == 0.0);
    CHECK(res.res_kv == 0.0);
    CHECK(res.res_bc == 0.0);
  }

  TEST_CASE("equation residual halves when the grid is refined") {
    const auto ch = default_chars();
    const double r51 = kernel_residual(solve_kernels(ch, 500.0, 51)).res_kw;
    const double r101 = kernel_residual(solve_kernels(ch, 500.0, 101)).res_kw;
    const double r201 = kernel_residual(solve_kernels(ch, 500.0, 201)).res_kw;
    CHECK(r101 / r51 == doctest::Approx(0.5).epsilon(0.3));
    CHECK(r201 / r101 == doctest::Approx(0.5).epsilon(0.3));
    const KernelPair k = solve_kernels(ch, 500.0, 101);
    CHECK(kernel_residual(k).max() / residual_scale(k) <= kKernelResidualTolerance);
  }

  TEST_CASE("boundary residual detects a perturbed K^v") {
    KernelPair k = solve_kernels(default_chars(), 500.0, 31);
    for (double& v : k.kv) v += 1e-3;
    CHECK(kernel_residual(k).res_bc >= 1e-3 * (1.0 - 1e-12));
  }

  TEST_CASE("solutions at n and 2n-1 converge at first order") {
    const auto ch = default_chars();
    auto gap = [&](int n) {
      const KernelPair a = solve_kernels(ch, 500.0, n);
      const KernelPair b = solve_kernels(ch, 500.0, 2 * n - 1);
      double d = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
          d = std::max(d, std::abs(a.kw_at(i, j) - b.kw_at(2 * i, 2 * j)));
          d = std::max(d, std::abs(a.kv_at(i, j) - b.kv_at(2 * i, 2 * j)));
        }
      }
      return d;
    };
    const double g1 = gap(26), g2 = gap(51);
    CHECK(g2 < 0.7 * g1);
  }

  TEST_CASE("kernels are continuous in lambda2") {
    const ModelParams p;
    auto at = [&](double l2) {
      return solve_kernels(characteristics(equilibrium_for_lambda2(l2, p), p), 500.0, 51);
    };
    const KernelPair a = at(20.0), b = at(20.0 + 1e-4), c = at(20.0 + 2e-4);
    double d1 = 0.0, d2 = 0.0;
    for (std::size_t q = 0; q < a.kw.size(); ++q) {
      d1 = std::max(d1, std::abs(b.kw[q] - a.kw[q]));
      d2 = std::max(d2, std::abs(c.kw[q] - a.kw[q]));
    }
    CHECK(d1 > 0.0);
    CHECK(d2 / d1 == doctest::Approx(2.0).epsilon(0.01));
  }

  TEST_CASE("interpolation: nodes, linear fields, diagonal and domain") {
    const auto ch = default_chars();
    KernelPair k = solve_kernels(ch, 500.0, 51);
    CHECK(eval_kernel(k, k.grid.coord(30), k.grid.coord(12)).kw == k.kw_at(30, 12));
    CHECK(eval_kernel(k, k.grid.coord(30), k.grid.coord(30)).kv == k.kv_at(30, 30));
    CHECK(eval_kernel(k, 317.0, 317.0).kw == doctest::Approx(-ch.c(317.0) / 30.0).epsilon(1e-4));
    CHECK_THROWS_AS(eval_kernel(k, 100.0, 120.0), DomainError);
    CHECK_THROWS_AS(eval_kernel(k, 501.0, 0.0), DomainError);
    CHECK_THROWS_AS(eval_kernel(k, 10.0, -1.0), DomainError);

    // Both interpolation rules reproduce affine fields exactly.
    KernelPair lin = k;
    for (int i = 0; i < lin.grid.n; ++i) {
      for (int j = 0; j <= i; ++j) {
        lin.kw[lin.grid.index(i, j)] = 1.0 + 2e-3 * lin.grid.coord(i) - 5e-3 * lin.grid.coord(j);
        lin.kv[lin.grid.index(i, j)] = -0.5 + 1e-3 * lin.grid.coord(j);
      }
    }
    for (auto [x, xi] : {std::pair{123.4, 56.7}, std::pair{123.4, 121.9}, std::pair{499.9, 499.0}}) {
      const auto v = eval_kernel(lin, x, xi);
      CHECK(v.kw == doctest::Approx(1.0 + 2e-3 * x - 5e-3 * xi).epsilon(1e-12));
      CHECK(v.kv == doctest::Approx(-0.5 + 1e-3 * xi).epsilon(1e-12));
    }

    // Characteristic constancy of K^v between lattice points, to O(h).
    const double h = k.grid.h;
    for (auto [x, xi, d] : {std::tuple{203.0, 41.0, 77.0}, std::tuple{151.5, 150.0, 210.0}}) {
      CHECK(std::abs(eval_kernel(k, x, xi).kv - eval_kernel(k, x + d, xi + d).kv) <= 1e-5 * h);
    }
  }

  TEST_CASE("grid derivative is exact on affine fields") {
    const KernelGrid g(11, 1.0);
    std::vector<double> f(g.node_count());
    for (int i = 0; i < g.n; ++i) {
      for (int j = 0; j <= i; ++j) f[g.index(i, j)] = 3.0 * g.coord(i) - 2.0 * g.coord(j);
    }
    CHECK(*grid_derivative(g, f, 5, 2, 0) == doctest::Approx(3.0));
    CHECK(*grid_derivative(g, f, 5, 5, 0) == doctest::Approx(3.0));
    CHECK(*grid_derivative(g, f, 5, 0, 1) == doctest::Approx(-2.0));
    CHECK_FALSE(grid_derivative(g, f, 10, 10, 0).has_value());
    CHECK_FALSE(grid_derivative(g, f, 0, 0, 1).has_value());
  }

  TEST_CASE("CSV export and runtime") {
    const auto t0 = std::chrono::steady_clock::now();
    const KernelPair k = solve_kernels(default_chars(), 500.0, 101);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 1.0);
    std::ostringstream os;
    write_kernel_csv(k, os);
    const std::string s = os.str();
    CHECK(s.rfind("x,xi,kw,kv\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')) == k.grid.node_count() + 1);
  }

  TEST_CASE("invalid inputs are rejected") {
    CharacteristicParams bad{10.0, -1.0, 0.0, -0.01, 0.001};
    CHECK_THROWS_AS(solve_kernels(bad, 500.0, 51), DomainError);
    CHECK_THROWS_AS(solve_kernels(default_chars(), 500.0, 2), DomainError);
  }
}
