#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arz/mlp.hpp"

namespace arz {

/// Which operator a model realizes: λ₂ ↦ (K^w, K^v) on 𝒯, or λ₂ ↦ U(·) on [0, T].
enum class OperatorKind : std::uint32_t { kernel = 0, law = 1 };

const char* to_string(OperatorKind kind);

/// Affine map of [lo, hi] onto [−1, 1].
struct InputScaler {
  double lo = -1.0;
  double hi = 1.0;
  [[nodiscard]] double apply(double x) const { return 2.0 * (x - lo) / (hi - lo) - 1.0; }
};

/// Network outputs are in units of `scale` around `mean`.
struct OutputScaler {
  double mean = 0.0;
  double scale = 1.0;
};

struct NetworkSpec {
  int width = 64;
  int depth = 3;  // hidden layers in branch and trunk
  int p = 32;     // basis functions per head
};

/// Branch/trunk operator network. For head h and trunk input y,
///   G(λ₂)(y)_h = mean_h + scale_h · Σ_{k<p} b_{h·p+k}(λ₂) t_k(y),
/// with one shared trunk and `heads` blocks of p branch outputs.
struct DeepONet {
  OperatorKind kind = OperatorKind::kernel;
  int p = 0;
  int heads = 0;
  Mlp branch;
  Mlp trunk;
  InputScaler sensor;                 // λ₂; also the trained range
  std::vector<InputScaler> coords;    // one per trunk input dimension
  std::vector<OutputScaler> outputs;  // one per head
  double length = 0.0;                // road length L the model was trained for
  double horizon = 0.0;               // T for law models, 0 for kernel models

  /// Random initialization for the given operator layout.
  static DeepONet create(OperatorKind kind, const NetworkSpec& spec, double lambda2_lo,
                         double lambda2_hi, double length, double horizon, std::mt19937_64& rng);

  [[nodiscard]] int trunk_dim() const { return kind == OperatorKind::kernel ? 2 : 1; }
  [[nodiscard]] bool in_trained_range(double lambda2) const;

  /// Normalized branch input for a batch of λ₂ values: 1 × B.
  [[nodiscard]] Eigen::MatrixXd branch_input(std::span<const double> lambda2) const;
  /// Normalized trunk input for raw points (trunk_dim × P).
  [[nodiscard]] Eigen::MatrixXd trunk_input(const Eigen::MatrixXd& points) const;

  /// (heads·p) × B branch features and p × P trunk features.
  [[nodiscard]] Eigen::MatrixXd branch_features(std::span<const double> lambda2) const;
  [[nodiscard]] Eigen::MatrixXd trunk_features(const Eigen::MatrixXd& points) const;

  /// Normalized predictions of head h: B × P = B_hᵀ T.
  [[nodiscard]] static Eigen::MatrixXd combine(const Eigen::MatrixXd& branch_feat,
                                               const Eigen::MatrixXd& trunk_feat, int head, int p);

  void validate() const;
};

struct OperatorPrediction {
  std::vector<std::vector<double>> heads;  // heads × points
  bool extrapolated = false;               // λ₂ outside the trained range
};

/// Evaluates the operator at λ₂ on raw trunk points (trunk_dim × P).
OperatorPrediction deeponet_eval(const DeepONet& model, double lambda2, const Eigen::MatrixXd& points);

/// Little-endian binary: magic, version, kind, p, heads, activation, scalers,
/// L, T, then both networks (layer count, widths, row-major weights, biases,
/// all as 8-byte IEEE doubles). A JSON sidecar `<path>.json` describes the
/// same metadata for humans. Throws ModelIoError on failure.
void save_model(const DeepONet& model, const std::filesystem::path& path);

/// Reads a model written by save_model. If `expected` is given, a model of the
/// other kind is rejected with ModelIoError.
DeepONet load_model(const std::filesystem::path& path, std::optional<OperatorKind> expected = std::nullopt);

/// Raw bytes of the binary encoding (what save_model writes).
std::string serialize_model(const DeepONet& model);
DeepONet deserialize_model(const std::string& bytes, std::optional<OperatorKind> expected = std::nullopt);

/// 64-bit FNV-1a over arbitrary bytes; used for model and dataset provenance hashes.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace arz
