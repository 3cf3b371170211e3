#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace arz {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out × in
  Eigen::VectorXd bias;    // out
};

/// Fully connected network, tanh on hidden layers, linear output layer.
/// Batched inputs are column-major: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  /// Glorot-uniform weights, zero biases.
  Mlp(std::vector<int> widths, std::mt19937_64& rng);
  /// All parameters zero.
  static Mlp zeros(std::vector<int> widths);

  [[nodiscard]] const std::vector<int>& widths() const { return widths_; }
  [[nodiscard]] int input_dim() const { return widths_.front(); }
  [[nodiscard]] int output_dim() const { return widths_.back(); }
  [[nodiscard]] std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Activations of every layer, kept for the backward pass.
  struct Tape {
    std::vector<Eigen::MatrixXd> activations;
  };

  [[nodiscard]] Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Tape& tape) const;

  /// Reverse pass: parameter gradients of Σ (upstream ⊙ output), accumulated
  /// into `grads` (same shapes as layers()).
  void backward(const Tape& tape, const Eigen::MatrixXd& upstream,
                std::vector<DenseLayer>& grads) const;

  /// Zero-filled gradient buffers matching this network.
  [[nodiscard]] std::vector<DenseLayer> zero_gradients() const;

 private:
  std::vector<int> widths_;
  std::vector<DenseLayer> layers_;
};

std::vector<double> mlp_forward(const Mlp& m, std::span<const double> input);

/// Gradients of upstream · m(input) with respect to every weight and bias.
std::vector<DenseLayer> mlp_gradients(const Mlp& m, std::span<const double> input,
                                      std::span<const double> upstream);

/// Adam with bias correction over a set of dense layers.
class Adam {
 public:
  Adam() = default;
  explicit Adam(const std::vector<DenseLayer>& shape, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(std::vector<DenseLayer>& params, const std::vector<DenseLayer>& grads, double lr);

 private:
  std::vector<DenseLayer> m_;
  std::vector<DenseLayer> v_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::int64_t t_ = 0;
};

}  // namespace arz
