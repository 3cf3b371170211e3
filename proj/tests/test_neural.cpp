#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "arz/deeponet.hpp"
#include "arz/errors.hpp"
#include "arz/mlp.hpp"

using namespace arz;

namespace {

// Plain-loop evaluation of a tanh MLP, written independently of Mlp::forward.
std::vector<double> naive_forward(const Mlp& m, std::vector<double> a) {
  const auto& layers = m.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& W = layers[l].weight;
    std::vector<double> z(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      double acc = layers[l].bias(r);
      for (Eigen::Index c = 0; c < W.cols(); ++c) acc += W(r, c) * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = (l + 1 < layers.size()) ? std::tanh(acc) : acc;
    }
    a = std::move(z);
  }
  return a;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

DeepONet random_model(OperatorKind kind, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  DeepONet m = DeepONet::create(kind, NetworkSpec{12, 2, 5}, 5.0, 25.0, 500.0,
                                kind == OperatorKind::law ? 300.0 : 0.0, rng);
  for (auto& o : m.outputs) o = {0.25, 1.5};
  return m;
}

Eigen::MatrixXd kernel_points() {
  Eigen::MatrixXd pts(2, 4);
  pts << 0.0, 100.0, 300.0, 500.0, 0.0, 50.0, 300.0, 120.0;
  return pts;
}

}  // namespace

TEST_SUITE("neural_op") {
  TEST_CASE("trivial networks") {
    const Mlp zero = Mlp::zeros({3, 4, 2});
    for (double v : mlp_forward(zero, std::vector<double>{1.0, -2.0, 0.5})) CHECK(v == 0.0);
    Mlp id = Mlp::zeros({3, 3});
    id.layers()[0].weight.setIdentity();
    const std::vector<double> x{0.3, -1.2, 7.0};
    CHECK(mlp_forward(id, x) == x);
    CHECK_THROWS_AS(mlp_forward(id, std::vector<double>{1.0}), ShapeError);
  }

  TEST_CASE("forward pass agrees with an independent evaluation") {
    std::mt19937_64 rng(11);
    const Mlp m({3, 9, 7, 4}, rng);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x{n01(rng), n01(rng), n01(rng)};
      const auto a = mlp_forward(m, x);
      const auto b = naive_forward(m, x);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
    }
  }

  TEST_CASE("gradients match central differences") {
    std::mt19937_64 rng(5);
    Mlp m({3, 6, 5, 2}, rng);
    std::normal_distribution<double> n01;
    for (auto& l : m.layers()) {
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.3 * n01(rng);
    }
    const std::vector<double> x{0.4, -0.7, 1.1};
    const std::vector<double> up{0.8, -1.3};
    const auto grads = mlp_gradients(m, x, up);
    const double step = 1e-5;
    int checked = 0;
    for (std::size_t l = 0; l < m.layers().size(); ++l) {
      auto check_param = [&](double& p, double analytic) {
        const double keep = p;
        p = keep + step;
        const double fp = dot(mlp_forward(m, x), up);
        p = keep - step;
        const double fm = dot(mlp_forward(m, x), up);
        p = keep;
        const double fd = (fp - fm) / (2 * step);
        CHECK(std::abs(analytic - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
        ++checked;
      };
      auto& layer = m.layers()[l];
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) check_param(layer.weight(r, c), grads[l].weight(r, c));
        check_param(layer.bias(r), grads[l].bias(r));
      }
    }
    CHECK(static_cast<std::size_t>(checked) == m.parameter_count());
  }

  TEST_CASE("gradient special cases") {
    std::mt19937_64 rng(2);
    const Mlp m({2, 4, 3}, rng);
    for (const auto& g : mlp_gradients(m, std::vector<double>{0.1, 0.2}, std::vector<double>{0.0, 0.0, 0.0})) {
      CHECK(g.weight.isZero(0.0));
      CHECK(g.bias.isZero(0.0));
    }
    const Mlp lin({3, 2}, rng);
    const std::vector<double> x{1.0, -2.0, 0.5}, up{3.0, -1.0};
    const auto g = mlp_gradients(lin, x, up);
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 3; ++c) CHECK(g[0].weight(r, c) == doctest::Approx(up[r] * x[c]));
      CHECK(g[0].bias(r) == doctest::Approx(up[r]));
    }
  }

  TEST_CASE("Adam reduces a quadratic") {
    std::vector<DenseLayer> p{{Eigen::MatrixXd::Constant(2, 2, 1.0), Eigen::VectorXd::Constant(2, -1.0)}};
    Adam opt(p);
    for (int k = 0; k < 2000; ++k) {
      std::vector<DenseLayer> g{{2.0 * p[0].weight, 2.0 * p[0].bias}};
      opt.step(p, g, 1e-2);
    }
    CHECK(p[0].weight.norm() < 1e-2);
    CHECK(p[0].bias.norm() < 1e-2);
  }

  TEST_CASE("DeepONet prediction is the p-term inner product per head") {
    const DeepONet m = random_model(OperatorKind::kernel);
    CHECK(m.heads == 2);
    CHECK(m.branch.output_dim() == m.heads * m.p);
    CHECK(m.trunk.output_dim() == m.p);
    const Eigen::MatrixXd pts = kernel_points();
    const double l2[1] = {12.0};
    const Eigen::MatrixXd bf = m.branch_features(l2);
    const Eigen::MatrixXd tf = m.trunk_features(pts);
    const OperatorPrediction pred = deeponet_eval(m, 12.0, pts);
    for (int h = 0; h < 2; ++h) {
      for (Eigen::Index q = 0; q < pts.cols(); ++q) {
        double s = 0.0;
        for (int k = 0; k < m.p; ++k) s += bf(h * m.p + k, 0) * tf(k, q);
        CHECK(pred.heads[h][q] == doctest::Approx(0.25 + 1.5 * s).epsilon(1e-13));
      }
    }
    CHECK_FALSE(pred.extrapolated);
    CHECK(deeponet_eval(m, 26.0, pts).extrapolated);
  }

  TEST_CASE("bilinear structure and zero branch") {
    DeepONet m = random_model(OperatorKind::law);
    Eigen::MatrixXd t(1, 3);
    t << 0.0, 150.0, 300.0;
    const Eigen::MatrixXd tf = m.trunk_features(t);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd b1(m.p, 1), b2(m.p, 1);
    for (int k = 0; k < m.p; ++k) {
      b1(k, 0) = n01(rng);
      b2(k, 0) = n01(rng);
    }
    const Eigen::MatrixXd lhs = DeepONet::combine(2.0 * b1 - 0.5 * b2, tf, 0, m.p);
    const Eigen::MatrixXd rhs = 2.0 * DeepONet::combine(b1, tf, 0, m.p) - 0.5 * DeepONet::combine(b2, tf, 0, m.p);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-13);

    auto& last = m.branch.layers().back();
    last.weight.setZero();
    last.bias.setZero();
    m.outputs[0] = {0.0, 1.0};
    const OperatorPrediction pred = deeponet_eval(m, 10.0, t);
    for (double v : pred.heads[0]) CHECK(v == 0.0);
  }

  TEST_CASE("model files round trip and reject bad input") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "arz_model_io_test";
    fs::create_directories(dir);
    const DeepONet m = random_model(OperatorKind::kernel);
    save_model(m, dir / "k.bin");
    CHECK(fs::exists(dir / "k.bin.json"));
    const DeepONet back = load_model(dir / "k.bin", OperatorKind::kernel);
    CHECK(serialize_model(back) == serialize_model(m));
    const auto a = deeponet_eval(m, 17.0, kernel_points());
    const auto b = deeponet_eval(back, 17.0, kernel_points());
    CHECK(a.heads == b.heads);

    CHECK_THROWS_AS(load_model(dir / "k.bin", OperatorKind::law), ModelIoError);
    CHECK_THROWS_AS(load_model(dir / "missing.bin"), ModelIoError);

    std::string bytes = serialize_model(m);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad_magic), ModelIoError);
    CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 8)), ModelIoError);
    CHECK_THROWS_AS(deserialize_model(bytes + "x"), ModelIoError);
    fs::remove_all(dir);
  }
}
