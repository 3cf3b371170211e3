#pragma once

#include "arz/operator_learning.hpp"

namespace testutil {

inline arz::DatasetSpec small_kernel_spec(int n_samples = 21, int grid_n = 21) {
  arz::DatasetSpec s;
  s.kind = arz::OperatorKind::kernel;
  s.n_samples = n_samples;
  s.grid_n = grid_n;
  return s;
}

inline arz::TrainingParams quick_training(int epochs, std::uint64_t seed = 1) {
  arz::TrainingParams tp;
  tp.max_epochs = epochs;
  tp.patience = epochs;
  tp.seed = seed;
  return tp;
}

// A kernel model trained briefly on a coarse dataset; accuracy is modest but
// the tests built on it only rely on measured, not assumed, errors.
inline const arz::DeepONet& small_kernel_model() {
  static const arz::DeepONet model = [] {
    const arz::OperatorDataset ds = arz::gen_kernel_dataset(small_kernel_spec());
    return arz::train(arz::NetworkSpec{32, 2, 16}, ds, quick_training(300)).model;
  }();
  return model;
}

}  // namespace testutil
