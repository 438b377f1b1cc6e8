#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "tcdc/tensor.hpp"

namespace tcdc {

/// v <- momentum * v + g;  p <- p - lr * v.
template <typename T>
void sgd_momentum_step(std::span<BasicTensor<T>* const> params, std::span<const BasicTensor<T>> grads,
                       std::vector<BasicTensor<T>>& velocity, double lr, double momentum);

/// Scales all gradients together so their global L2 norm is at most max_norm
/// (no-op when max_norm is 0). Returns the norm before scaling.
template <typename T>
double clip_grad_norm(std::span<BasicTensor<T>> grads, double max_norm);

enum class PlateauMode { Min, Max };

/// Reduce-on-plateau schedule. An epoch improves when the metric beats the
/// best so far by more than `threshold`; after `patience` consecutive epochs
/// without improvement the rate is multiplied by `factor` and the count resets.
struct PlateauState {
  double lr = 0.1;
  std::size_t patience = 10;
  double factor = 0.1;
  double threshold = 1e-4;
  PlateauMode mode = PlateauMode::Min;
  double best = std::numeric_limits<double>::quiet_NaN();  // NaN until the first epoch
  std::size_t bad_epochs = 0;
  std::size_t reductions = 0;

  bool operator==(const PlateauState&) const = default;
};

/// Returns the learning rate for the next epoch.
double lr_plateau_update(PlateauState& state, double metric);

}  // namespace tcdc
