#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "arz/bench.hpp"
#include "arz/errors.hpp"

using namespace arz;
namespace fs = std::filesystem;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "test.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentConfig short_scenario() {
  ExperimentConfig cfg;
  cfg.sim.t_end = 40.0;
  cfg.compare.timing_repeats = 3;
  cfg.compare.controllers = {"backstepping", "pi", "open_loop"};
  return cfg;
}

}  // namespace

TEST_SUITE("bench_cli") {
  TEST_CASE("defaults and round trip") {
    const ExperimentConfig def;
    CHECK_NOTHROW(def.validate());
    CHECK(parse_config("") == def);
    CHECK(parse_config(serialize_config(def)) == def);

    ExperimentConfig c;
    c.rho_star = 0.1 + 0.2 + 110.0;
    c.sim.mode = SimMode::linearized;
    c.sim.amplitude = 1.0 / 3.0;
    c.controller.type = "pi";
    c.controller.kernel_model = "some dir/with: colon.bin";
    c.compare.controllers = {"no_law", "backstepping"};
    c.dataset.kind = OperatorKind::law;
    c.training.lr_decay = 0.9991;
    c.seed = 18446744073709551615ull;
    const ExperimentConfig back = parse_config(serialize_config(c));
    CHECK(back == c);
    CHECK(serialize_config(back) == serialize_config(c));
  }

  TEST_CASE("units: densities in the file are veh/km") {
    const ExperimentConfig c = parse_config("rho_star: 110\nmodel:\n  rho_m: 160\n");
    CHECK(c.equilibrium_state().rho_star == doctest::Approx(0.11));
    CHECK(c.sim_config().chars().lambda2 == doctest::Approx(15.0));
    CHECK(c.dataset_spec().rho_min == doctest::Approx(0.09));
  }

  TEST_CASE("diagnostics name the key and line") {
    const std::string unknown = config_error("model:\n  v_f: 40\n  bogus: 1\n");
    CHECK(unknown.find("test.yaml:3") != std::string::npos);
    CHECK(unknown.find("model.bogus") != std::string::npos);

    const std::string type = config_error("seed: 1\nsim:\n  nx: ten\n");
    CHECK(type.find("test.yaml:3") != std::string::npos);
    CHECK(type.find("sim.nx") != std::string::npos);

    const std::string mode = config_error("sim:\n  mode: implicit\n");
    CHECK(mode.find("sim.mode") != std::string::npos);

    CHECK(config_error("model: [1, 2\n").find("test.yaml:") != std::string::npos);
    CHECK(config_error("rho_star: 70\n").find("congested") != std::string::npos);
    CHECK_FALSE(config_error("compare:\n  controllers: [pi]\n").empty());
    CHECK_FALSE(config_error("controller:\n  type: mpc\n").empty());
    CHECK_FALSE(config_error("sim:\n  cfl: 1.2\n").empty());
    CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ConfigError);
  }

  TEST_CASE("error metric") {
    ExperimentConfig cfg = short_scenario();
    const SimConfig sc = cfg.sim_config();
    const TrafficState ic = initial_condition(0.1, 3, sc);
    ZeroController zero;
    const Trajectory a = simulate(sc, ic, zero);
    CHECK(average_l2_error(a, a, sc.eq, 500.0) == 0.0);

    // Candidate equal to the equilibrium everywhere has error exactly 1.
    Trajectory eq = a;
    for (auto& s : eq.snapshots) {
      s.rho.assign(s.rho.size(), sc.eq.rho_star);
      s.v.assign(s.v.size(), sc.eq.v_star);
    }
    CHECK(average_l2_error(eq, a, sc.eq, 500.0) == doctest::Approx(1.0).epsilon(1e-12));

    Trajectory shorter = a;
    shorter.snapshots.pop_back();
    CHECK_THROWS_AS(average_l2_error(shorter, a, sc.eq, 500.0), ShapeError);
  }

  TEST_CASE("comparison rows, timings and outputs") {
    const ExperimentConfig cfg = short_scenario();
    const ComparisonReport rep = run_comparison(cfg, configured_factories(cfg));
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows.front().name == "backstepping");
    CHECK(rep.row("backstepping").error == 0.0);
    CHECK(rep.row("pi").error > 0.0);
    CHECK(rep.row("backstepping").cold_start_time > 0.0);
    CHECK(rep.row("backstepping").final_norm < rep.row("open_loop").final_norm);
    CHECK_THROWS_AS((void)rep.row("no_law"), ConfigError);

    const fs::path dir = fs::temp_directory_path() / "arz_bench_test";
    fs::remove_all(dir);
    write_trajectory_csvs(rep.row("pi").trajectory, dir, "pi");
    const std::string state = slurp(dir / "pi_state.csv");
    CHECK(state.rfind("t,x,rho,v\n", 0) == 0);
    CHECK(std::count(state.begin(), state.end(), '\n') == 1 + 41 * 100);
    CHECK(slurp(dir / "pi_control.csv").rfind("t,U\n", 0) == 0);
    CHECK(slurp(dir / "pi_norm.csv").rfind("t,l2_w,l2_v,norm\n", 0) == 0);
    write_trajectory_csvs(rep.row("pi").trajectory, dir / "again", "pi");
    CHECK(slurp(dir / "again" / "pi_state.csv") == state);

    write_comparison_csv(rep, dir / "comparison.csv");
    CHECK(slurp(dir / "comparison.csv").rfind("controller,step_time_s,cold_start_time_s,avg_l2_error", 0) == 0);
    write_plot_script(dir, {"pi"});
    CHECK(slurp(dir / "plot.py").find("\"pi\"") != std::string::npos);
    fs::remove_all(dir);
  }

  TEST_CASE("controllers from configuration") {
    ExperimentConfig cfg;
    cfg.controller.kernel_model = "/nonexistent/kernel.bin";
    CHECK_THROWS_AS(make_controller("no_kernels", cfg), ModelIoError);
    CHECK(make_controller("pi", cfg)->name() == "pi");
    CHECK(make_controller("open_loop", cfg)->name() == "open_loop");
    CHECK_THROWS_AS(make_controller("mpc", cfg), ConfigError);
  }

  TEST_CASE("PI tuning searches the stated box") {
    ExperimentConfig cfg = short_scenario();
    const PITuning t = tune_pi(cfg, 3, 3);
    CHECK(t.kp >= -2.0);
    CHECK(t.kp <= 2.0);
    CHECK(t.ki >= -0.05);
    CHECK(t.ki <= 0.05);
    PIController zero(0.0, 0.0);
    const SimConfig sc = cfg.sim_config();
    CHECK(t.cost <= integrated_norm(simulate(sc, initial_condition(0.1, 3, sc), zero)));
  }
}
