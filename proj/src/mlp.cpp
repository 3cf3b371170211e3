#include "arz/mlp.hpp"

#include <cmath>
#include <sstream>

#include "arz/errors.hpp"

namespace arz {

namespace {

void check_widths(const std::vector<int>& widths) {
  if (widths.size() < 2) throw ShapeError("Mlp: need at least input and output widths");
  for (int w : widths) {
    if (w < 1) throw ShapeError("Mlp: layer widths must be positive");
  }
}

}  // namespace

Mlp::Mlp(std::vector<int> widths, std::mt19937_64& rng) : widths_(std::move(widths)) {
  check_widths(widths_);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int in = widths_[l];
    const int out = widths_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    }
    layers_.push_back(std::move(layer));
  }
}

Mlp Mlp::zeros(std::vector<int> widths) {
  check_widths(widths);
  Mlp m;
  m.widths_ = std::move(widths);
  for (std::size_t l = 0; l + 1 < m.widths_.size(); ++l) {
    m.layers_.push_back({Eigen::MatrixXd::Zero(m.widths_[l + 1], m.widths_[l]),
                         Eigen::VectorXd::Zero(m.widths_[l + 1])});
  }
  return m;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) const {
  if (input.rows() != input_dim()) {
    std::ostringstream os;
    os << "Mlp::forward: input has " << input.rows() << " rows, network expects " << input_dim();
    throw ShapeError(os.str());
  }
  Eigen::MatrixXd a = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    a = (l + 1 < layers_.size()) ? Eigen::MatrixXd(z.array().tanh()) : std::move(z);
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Tape& tape) const {
  if (input.rows() != input_dim()) throw ShapeError("Mlp::forward: input dimension mismatch");
  tape.activations.resize(layers_.size() + 1);
  tape.activations[0] = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * tape.activations[l];
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.array().tanh();
    tape.activations[l + 1] = std::move(z);
  }
  return tape.activations.back();
}

void Mlp::backward(const Tape& tape, const Eigen::MatrixXd& upstream,
                   std::vector<DenseLayer>& grads) const {
  if (upstream.rows() != output_dim() || upstream.cols() != tape.activations.back().cols()) {
    throw ShapeError("Mlp::backward: upstream gradient shape mismatch");
  }
  if (grads.size() != layers_.size()) throw ShapeError("Mlp::backward: gradient buffer mismatch");
  Eigen::MatrixXd delta = upstream;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Eigen::MatrixXd& a_prev = tape.activations[l];
    grads[l].weight.noalias() += delta * a_prev.transpose();
    grads[l].bias += delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = layers_[l].weight.transpose() * delta;
    delta = back.array() * (1.0 - a_prev.array().square());
  }
}

std::vector<DenseLayer> Mlp::zero_gradients() const {
  std::vector<DenseLayer> g;
  g.reserve(layers_.size());
  for (const auto& l : layers_) {
    g.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                 Eigen::VectorXd::Zero(l.bias.size())});
  }
  return g;
}

std::vector<double> mlp_forward(const Mlp& m, std::span<const double> input) {
  if (static_cast<int>(input.size()) != m.input_dim()) {
    throw ShapeError("mlp_forward: input dimension mismatch");
  }
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  const Eigen::MatrixXd y = m.forward(x);
  return {y.data(), y.data() + y.size()};
}

std::vector<DenseLayer> mlp_gradients(const Mlp& m, std::span<const double> input,
                                      std::span<const double> upstream) {
  if (static_cast<int>(input.size()) != m.input_dim() ||
      static_cast<int>(upstream.size()) != m.output_dim()) {
    throw ShapeError("mlp_gradients: input or upstream dimension mismatch");
  }
  Mlp::Tape tape;
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  m.forward(x, tape);
  const Eigen::MatrixXd up = Eigen::Map<const Eigen::VectorXd>(upstream.data(), static_cast<Eigen::Index>(upstream.size()));
  auto grads = m.zero_gradients();
  m.backward(tape, up, grads);
  return grads;
}

Adam::Adam(const std::vector<DenseLayer>& shape, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& l : shape) {
    m_.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  v_ = m_;
}

void Adam::step(std::vector<DenseLayer>& params, const std::vector<DenseLayer>& grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("Adam::step: shape mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step = lr * std::sqrt(c2) / c1;
  for (std::size_t l = 0; l < params.size(); ++l) {
    m_[l].weight = beta1_ * m_[l].weight + (1.0 - beta1_) * grads[l].weight;
    v_[l].weight = beta2_ * v_[l].weight + (1.0 - beta2_) * grads[l].weight.cwiseAbs2();
    params[l].weight.array() -= step * m_[l].weight.array() / (v_[l].weight.array().sqrt() + eps_);
    m_[l].bias = beta1_ * m_[l].bias + (1.0 - beta1_) * grads[l].bias;
    v_[l].bias = beta2_ * v_[l].bias + (1.0 - beta2_) * grads[l].bias.cwiseAbs2();
    params[l].bias.array() -= step * m_[l].bias.array() / (v_[l].bias.array().sqrt() + eps_);
  }
}

}  // namespace arz
