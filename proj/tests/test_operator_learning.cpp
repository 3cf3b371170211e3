#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>

#include "arz/control.hpp"
#include "arz/errors.hpp"
#include "arz/grid.hpp"
#include "helpers.hpp"

using namespace arz;

namespace {

double final_train_loss(const DeepONet& model, const OperatorDataset& ds) {
  return dataset_loss(model, ds, ds.train);
}

}  // namespace

TEST_SUITE("operator_learning") {
  TEST_CASE("default split: 800/100, disjoint, exhaustive, endpoints train, stratified") {
    OperatorDataset ds;
    ds.lambda2.resize(900);
    assign_split(ds, 1.0 / 9.0);
    CHECK(ds.train.size() == 800);
    CHECK(ds.validation.size() == 100);
    std::set<std::size_t> all(ds.train.begin(), ds.train.end());
    for (std::size_t v : ds.validation) CHECK(all.insert(v).second);
    CHECK(all.size() == 900);
    CHECK(std::find(ds.train.begin(), ds.train.end(), 0) != ds.train.end());
    CHECK(std::find(ds.train.begin(), ds.train.end(), 899) != ds.train.end());
    // One held-out index in every block of nine.
    for (std::size_t b = 0; b < 100; ++b) {
      CHECK(std::count_if(ds.validation.begin(), ds.validation.end(),
                          [&](std::size_t i) { return i / 9 == b; }) == 1);
    }
  }

  TEST_CASE("kernel dataset: endpoints, residual gate, determinism, file round trip") {
    const DatasetSpec spec = testutil::small_kernel_spec(9, 21);
    const OperatorDataset ds = gen_kernel_dataset(spec);
    CHECK(ds.lambda2.front() == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(ds.lambda2.back() == doctest::Approx(25.0).epsilon(1e-12));
    CHECK(ds.points.cols() == 231);
    CHECK(ds.heads() == 2);
    for (const auto& t : ds.targets) CHECK(t.allFinite());

    const OperatorDataset again = gen_kernel_dataset(spec);
    CHECK(again.config_hash == ds.config_hash);
    CHECK(again.targets[0] == ds.targets[0]);
    CHECK(again.targets[1] == ds.targets[1]);

    DatasetSpec other = spec;
    other.rho_max = 0.125;
    CHECK(gen_kernel_dataset(other).config_hash != ds.config_hash);

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "arz_dataset_test";
    fs::remove_all(dir);
    write_dataset(ds, dir);
    const OperatorDataset back = read_dataset(dir);
    CHECK(back.spec.canonical() == ds.spec.canonical());
    CHECK(back.lambda2 == ds.lambda2);
    CHECK(back.train == ds.train);
    CHECK(back.validation == ds.validation);
    CHECK(back.points == ds.points);
    CHECK(back.targets[0] == ds.targets[0]);
    CHECK(back.targets[1] == ds.targets[1]);
    fs::remove(dir / "sample_0003.csv");
    CHECK_THROWS_AS(read_dataset(dir), ModelIoError);
    fs::remove_all(dir);

    DatasetSpec freeflow = spec;
    freeflow.rho_min = 0.07;
    CHECK_THROWS_AS(gen_kernel_dataset(freeflow), ConfigError);
  }

  TEST_CASE("law dataset targets start at the feedback value and settle") {
    DatasetSpec spec;
    spec.kind = OperatorKind::law;
    spec.n_samples = 3;
    spec.rho_min = 0.11;
    spec.rho_max = 0.13;
    const OperatorDataset ds = gen_law_dataset(spec);
    CHECK(ds.points.cols() == 301);
    for (std::size_t s = 0; s < ds.size(); ++s) {
      const Equilibrium eq = equilibrium(ds.rho_star[s], spec.params);
      const SimConfig cfg = spec.sim_config(eq);
      const TrafficState ic = initial_condition(spec.amplitude, spec.wavenumber, cfg);
      const auto grid = cell_centers(spec.params.length, spec.nx);
      const RiemannState rs = to_riemann(ic.rho, ic.v, grid, eq, cfg.chars(), spec.params);
      const KernelPair k = solve_kernels(cfg.chars(), spec.params.length, spec.kernel_n);
      CHECK(ds.targets[0](static_cast<Eigen::Index>(s), 0) == doctest::Approx(backstepping_control(rs, k)).epsilon(1e-14));

      const CharacteristicParams ch = cfg.chars();
      const double t_f = spec.params.length / ch.lambda1 + spec.params.length / ch.lambda2;
      const auto row = ds.targets[0].row(static_cast<Eigen::Index>(s));
      const double peak = row.cwiseAbs().maxCoeff();
      for (Eigen::Index q = 0; q < row.size(); ++q) {
        if (ds.points(0, q) > 2.0 * t_f) REQUIRE(std::abs(row(q)) < 0.05 * peak);
      }
    }
  }

  TEST_CASE("memorizes a single instance but not shuffled targets") {
    const OperatorDataset one = gen_kernel_dataset(testutil::small_kernel_spec(1, 21));
    CHECK(one.train.size() == 1);
    // One instance means one optimizer step per epoch, hence the long schedule.
    TrainingParams tp = testutil::quick_training(16000);
    tp.batch_points = 231;
    tp.learning_rate = 1e-2;
    tp.lr_decay = 0.9996;
    const TrainResult fit = train(NetworkSpec{32, 2, 16}, one, tp);
    CHECK(final_train_loss(fit.model, one) < 1e-6);

    OperatorDataset shuffled = one;
    std::mt19937_64 rng(4);
    for (auto& t : shuffled.targets) {
      std::vector<Eigen::Index> perm(static_cast<std::size_t>(t.cols()));
      std::iota(perm.begin(), perm.end(), Eigen::Index{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      const Eigen::MatrixXd orig = t;
      for (Eigen::Index q = 0; q < t.cols(); ++q) t(0, q) = orig(0, perm[static_cast<std::size_t>(q)]);
    }
    const TrainResult noise = train(NetworkSpec{32, 2, 16}, shuffled, tp);
    CHECK(final_train_loss(noise.model, shuffled) > 1e-6);
  }

  TEST_CASE("training is deterministic and tracks the best validation loss") {
    const OperatorDataset ds = gen_kernel_dataset(testutil::small_kernel_spec(19, 21));
    const TrainResult a = train(NetworkSpec{16, 2, 8}, ds, testutil::quick_training(40, 9));
    const TrainResult b = train(NetworkSpec{16, 2, 8}, ds, testutil::quick_training(40, 9));
    CHECK(serialize_model(a.model) == serialize_model(b.model));
    CHECK(a.val_loss == b.val_loss);
    const TrainResult c = train(NetworkSpec{16, 2, 8}, ds, testutil::quick_training(40, 10));
    CHECK(serialize_model(c.model) != serialize_model(a.model));

    REQUIRE(a.best_val.size() == a.val_loss.size());
    for (std::size_t e = 1; e < a.best_val.size(); ++e) CHECK(a.best_val[e] <= a.best_val[e - 1]);
    CHECK(dataset_loss(a.model, ds, ds.validation) == doctest::Approx(a.best_val.back()).epsilon(1e-12));
  }

  TEST_CASE("divergence aborts with the history so far") {
    const OperatorDataset ds = gen_kernel_dataset(testutil::small_kernel_spec(9, 21));
    TrainingParams tp = testutil::quick_training(200);
    tp.learning_rate = 1e6;
    try {
      train(NetworkSpec{16, 2, 8}, ds, tp);
      FAIL("training at an absurd step size should diverge");
    } catch (const TrainingDiverged& e) {
      CHECK_FALSE(e.partial().val_loss.empty());
    }
    tp.learning_rate = -1.0;
    CHECK_THROWS_AS(train(NetworkSpec{16, 2, 8}, ds, tp), ConfigError);
  }

  TEST_CASE("approximation error report") {
    const ModelParams params;
    const Oracle oracle = kernel_oracle(params, 21);
    const std::vector<double> grid{5.0, 15.0, 25.0};
    const Predictor lookup = [&](double l2, const Eigen::MatrixXd&) { return oracle(l2).heads; };
    const ApproxErrorReport exact = measure_eps(lookup, grid, oracle);
    CHECK(exact.eps_sup == 0.0);
    CHECK(exact.eps_l2 == 0.0);

    const DeepONet& model = testutil::small_kernel_model();
    const ApproxErrorReport rep = measure_eps(model, grid, oracle);
    CHECK(rep.eps_sup >= rep.value_sup);
    CHECK(rep.value_sup >= rep.eps_l2);
    CHECK(rep.eps_l2 > 0.0);

    // Learned kernels inherit the boundary conditions up to the measured error.
    const KernelGrid g(21, params.length);
    for (double l2 : grid) {
      const auto ch = characteristics(equilibrium_for_lambda2(l2, params), params);
      const auto pred = deeponet_eval(model, l2, kernel_grid_points(g));
      for (int i = 0; i < g.n; ++i) {
        CHECK(std::abs(pred.heads[0][g.index(i, i)] + ch.c(g.coord(i)) / (ch.lambda1 + ch.lambda2)) <= rep.eps_sup);
        CHECK(std::abs(pred.heads[1][g.index(i, 0)] + pred.heads[0][g.index(i, 0)]) <= 2.0 * rep.eps_sup);
      }
    }
  }

  TEST_CASE("approximation error shrinks with network capacity") {
    const OperatorDataset ds = gen_kernel_dataset(testutil::small_kernel_spec(41, 21));
    const ModelParams params;
    const Oracle oracle = kernel_oracle(params, 21);
    std::vector<double> test;
    for (int i = 0; i < 9; ++i) test.push_back(6.1 + 2.2 * i);
    std::vector<double> eps;
    for (auto [p, width] : {std::pair{8, 16}, std::pair{32, 32}, std::pair{128, 64}}) {
      const TrainResult r = train(NetworkSpec{width, 2, p}, ds, testutil::quick_training(150));
      eps.push_back(measure_eps(r.model, test, oracle).eps_sup);
      MESSAGE("p = " << p << ", width = " << width << ": eps_sup = " << eps.back());
    }
    CHECK(eps[2] < eps[0]);
  }
}
