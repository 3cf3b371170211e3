#include <doctest.h>

#include <cmath>

#include "arz/control.hpp"
#include "arz/errors.hpp"
#include "arz/kernel_solver.hpp"
#include "arz/simulator.hpp"

using namespace arz;

namespace {

SimConfig default_config(SimMode mode = SimMode::nonlinear) {
  SimConfig cfg;
  cfg.eq = equilibrium(0.12, cfg.params);
  cfg.mode = mode;
  return cfg;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_SUITE("arz_sim") {
  TEST_CASE("initial condition") {
    const SimConfig cfg = default_config();
    const TrafficState flat = initial_condition(0.0, 3, cfg);
    for (std::size_t i = 0; i < flat.rho.size(); ++i) {
      CHECK(flat.rho[i] == cfg.eq.rho_star);
      CHECK(flat.v[i] == cfg.eq.v_star);
    }
    const PointState peak = sinusoidal_profile(500.0 / 6.0, 0.1, 3, cfg.eq, 500.0);
    CHECK(per_m_to_per_km(peak.rho) == doctest::Approx(132.0).epsilon(1e-13));
    CHECK(peak.v == doctest::Approx(9.0).epsilon(1e-13));

    const TrafficState wave = initial_condition(0.1, 3, cfg);
    for (std::size_t i = 0; i < wave.rho.size(); ++i) {
      CHECK((wave.rho[i] - cfg.eq.rho_star) * (wave.v[i] - cfg.eq.v_star) <= 0.0);
    }
    CHECK_THROWS_AS(initial_condition(0.5, 3, cfg), ConfigError);
  }

  TEST_CASE("CFL step at equilibrium") {
    SimConfig cfg = default_config();
    const TrafficState s = initial_condition(0.0, 3, cfg);
    CHECK(cfl_dt(s, cfg) == doctest::Approx(0.8 * 5.0 / 20.0).epsilon(1e-14));
    CHECK(cfl_dt(s, cfg) == doctest::Approx(0.2).epsilon(1e-14));
    cfg.nx = 200;
    CHECK(cfl_dt(initial_condition(0.0, 3, cfg), cfg) == doctest::Approx(0.1).epsilon(1e-14));
    const SimConfig lin = default_config(SimMode::linearized);
    CHECK(cfl_dt(s, lin) == doctest::Approx(0.2).epsilon(1e-14));
  }

  TEST_CASE("equilibrium is a fixed point of both schemes") {
    for (SimMode mode : {SimMode::nonlinear, SimMode::linearized}) {
      const SimConfig cfg = default_config(mode);
      TrafficState s = initial_condition(0.0, 3, cfg);
      for (int k = 0; k < 50; ++k) {
        s = step(s, 0.0, cfl_dt(s, cfg), cfg).state;
        for (std::size_t i = 0; i < s.rho.size(); ++i) {
          REQUIRE(std::abs(s.rho[i] - cfg.eq.rho_star) <= 1e-12 * cfg.eq.rho_star);
          REQUIRE(std::abs(s.v[i] - cfg.eq.v_star) <= 1e-12 * cfg.eq.v_star);
        }
      }
    }
  }

  TEST_CASE("vehicle count changes by the boundary fluxes") {
    const SimConfig cfg = default_config();
    TrafficState s = initial_condition(0.1, 3, cfg);
    for (int k = 0; k < 200; ++k) {
      const double dt = cfl_dt(s, cfg);
      const double u = 0.5 * std::sin(0.05 * k);
      const StepResult r = step(s, u, dt, cfg);
      const double change = vehicle_count(r.state, 500.0) - vehicle_count(s, 500.0);
      REQUIRE(std::abs(change - dt * (r.inflow - r.outflow)) <= 1e-10);
      s = r.state;
    }
  }

  TEST_CASE("single step converges to a fine-step reference") {
    const SimConfig cfg = default_config();
    const TrafficState s0 = initial_condition(0.1, 3, cfg);
    const double dt = cfl_dt(s0, cfg);
    auto reference = [&](double span) {
      TrafficState s = s0;
      for (int k = 0; k < 100; ++k) s = step(s, 0.0, span / 100.0, cfg).state;
      return s;
    };
    auto error = [&](double span) {
      const TrafficState coarse = step(s0, 0.0, span, cfg).state;
      const TrafficState fine = reference(span);
      return max_diff(coarse.rho, fine.rho) + max_diff(coarse.v, fine.v) / 100.0;
    };
    const double e1 = error(dt), e2 = error(dt / 2.0);
    CHECK(e1 > 0.0);
    CHECK(e2 < 0.6 * e1);
  }

  TEST_CASE("step input validation") {
    const SimConfig cfg = default_config();
    const TrafficState s = initial_condition(0.1, 3, cfg);
    CHECK_THROWS_AS(step(s, 0.0, 2.0 * cfl_dt(s, cfg), cfg), NumericsError);
    CHECK_THROWS_AS(step(s, 0.0, 0.0, cfg), NumericsError);
    TrafficState short_state = s;
    short_state.rho.pop_back();
    short_state.v.pop_back();
    CHECK_THROWS_AS(step(short_state, 0.0, 0.1, cfg), ShapeError);
    // An outlet command that drives the boundary speed negative is reported.
    CHECK_THROWS_AS(step(s, -50.0, 0.1, cfg), NumericsError);
    SimConfig bad = cfg;
    bad.cfl = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("closed loop settles, open loop does not, and runs are deterministic") {
    const SimConfig cfg = default_config();
    const TrafficState ic = initial_condition(0.1, 3, cfg);
    const KernelPair k = solve_kernels(cfg.chars(), 500.0, 101);
    BacksteppingController bs(k);
    ZeroController zero;
    const Trajectory closed = simulate(cfg, ic, bs);
    const Trajectory open = simulate(cfg, ic, zero);
    CHECK(closed.size() == 301);
    CHECK(closed.time(300) == doctest::Approx(300.0));
    CHECK(closed.control.size() == closed.size());
    CHECK(closed.norm(closed.index_at(112.5)) <= 0.05 * closed.norm(0));
    CHECK(open.norm(open.size() - 1) > closed.norm(closed.size() - 1));

    BacksteppingController bs2(k);
    const Trajectory again = simulate(cfg, ic, bs2);
    CHECK(again.control == closed.control);
    CHECK(again.snapshots.back().rho == closed.snapshots.back().rho);

    const SimConfig lin = default_config(SimMode::linearized);
    BacksteppingController bs3(k);
    const Trajectory linear = simulate(lin, ic, bs3);
    const std::size_t i = linear.index_at(112.5);
    CHECK(linear.norm(i) / linear.norm(0) <= closed.norm(i) / closed.norm(0) * (1.0 + 1e-9));
  }
}
