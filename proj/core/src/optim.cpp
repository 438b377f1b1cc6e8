#include "tcdc/optim.hpp"

#include <cmath>
#include <string>

namespace tcdc {

template <typename T>
void sgd_momentum_step(std::span<BasicTensor<T>* const> params, std::span<const BasicTensor<T>> grads,
                       std::vector<BasicTensor<T>>& velocity, double lr, double momentum) {
  if (grads.size() != params.size()) fail(ErrorCode::ShapeMismatch, "gradient count differs from parameter count");
  if (velocity.empty()) {
    for (const auto* p : params) velocity.emplace_back(p->dims());
  }
  if (velocity.size() != params.size()) fail(ErrorCode::ShapeMismatch, "velocity count differs from parameter count");
  const T m = static_cast<T>(momentum);
  const T rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    require_same_dims(p.dims(), grads[i].dims(), "sgd grads");
    require_same_dims(p.dims(), velocity[i].dims(), "sgd velocity");
    T* v = velocity[i].ptr();
    const T* g = grads[i].ptr();
    T* w = p.ptr();
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = m * v[j] + g[j];
      w[j] -= rate * v[j];
    }
  }
}

template <typename T>
double clip_grad_norm(std::span<BasicTensor<T>> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (T v : g.data()) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& g : grads)
      for (T& v : g.data()) v *= scale;
  }
  return norm;
}

double lr_plateau_update(PlateauState& s, double metric) {
  if (!std::isfinite(metric)) fail(ErrorCode::NumericFailure, "plateau metric is not finite");
  const bool improved = std::isnan(s.best) ||
                        (s.mode == PlateauMode::Min ? metric < s.best - s.threshold : metric > s.best + s.threshold);
  if (improved) {
    s.best = metric;
    s.bad_epochs = 0;
  } else if (++s.bad_epochs >= s.patience) {
    s.lr *= s.factor;
    s.bad_epochs = 0;
    ++s.reductions;
  }
  return s.lr;
}

template void sgd_momentum_step(std::span<BasicTensor<float>* const>, std::span<const BasicTensor<float>>,
                                std::vector<BasicTensor<float>>&, double, double);
template void sgd_momentum_step(std::span<BasicTensor<double>* const>, std::span<const BasicTensor<double>>,
                                std::vector<BasicTensor<double>>&, double, double);
template double clip_grad_norm(std::span<BasicTensor<float>>, double);
template double clip_grad_norm(std::span<BasicTensor<double>>, double);

}  // namespace tcdc
