#include "tcdc/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace tcdc {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using MutVec = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
void check_linear(const BasicTensor<T>& x, const LinearParams<T>& p) {
  if (x.rank() != 2) fail(ErrorCode::ShapeMismatch, "linear input must be rank 2 [N,D]");
  if (p.weights.rank() != 2 || p.weights.dim(1) != x.dim(1)) {
    fail(ErrorCode::ShapeMismatch, "linear weights do not match input width " + std::to_string(x.dim(1)));
  }
  require_same_dims(p.bias.dims(), {p.weights.dim(0)}, "linear bias");
}

}  // namespace

Extent3 PoolSpec::output_extent(const Extent3& in) const {
  auto axis = [](std::size_t d, std::size_t k, std::size_t s) {
    if (k == 0 || s == 0) fail(ErrorCode::InvalidSpec, "pool window and stride must be positive");
    if (k > d) fail(ErrorCode::EmptyOutput, "pool window exceeds input extent");
    return (d - k) / s + 1;
  };
  return {axis(in.t, window.t, stride.t), axis(in.h, window.h, stride.h), axis(in.w, window.w, stride.w)};
}

template <typename T>
PoolResult<T> maxpool3d(const BasicTensor<T>& x, const PoolSpec& spec) {
  if (x.rank() != 5) fail(ErrorCode::ShapeMismatch, "maxpool3d input must be rank 5");
  const auto& d = x.dims();
  const Extent3 in{d[2], d[3], d[4]};
  const Extent3 out = spec.output_extent(in);
  const std::size_t planes = d[0] * d[1];
  PoolResult<T> r{BasicTensor<T>({d[0], d[1], out.t, out.h, out.w}), {}};
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const std::size_t base = pl * in.volume();
    for (std::size_t to = 0; to < out.t; ++to)
      for (std::size_t ho = 0; ho < out.h; ++ho)
        for (std::size_t wo = 0; wo < out.w; ++wo, ++o) {
          std::size_t best = base + ((to * spec.stride.t) * in.h + ho * spec.stride.h) * in.w + wo * spec.stride.w;
          T best_val = x[best];
          for (std::size_t kt = 0; kt < spec.window.t; ++kt)
            for (std::size_t kh = 0; kh < spec.window.h; ++kh)
              for (std::size_t kw = 0; kw < spec.window.w; ++kw) {
                const std::size_t i = base + ((to * spec.stride.t + kt) * in.h + ho * spec.stride.h + kh) * in.w +
                                      wo * spec.stride.w + kw;
                if (x[i] > best_val) {
                  best_val = x[i];
                  best = i;
                }
              }
          r.output[o] = best_val;
          r.argmax[o] = best;
        }
  }
  return r;
}

template <typename T>
BasicTensor<T> maxpool3d_backward(const BasicTensor<T>& grad_out, std::span<const std::size_t> argmax,
                                  const Shape& input_dims) {
  if (argmax.size() != grad_out.size()) fail(ErrorCode::ShapeMismatch, "argmax length differs from grad_out");
  BasicTensor<T> gx(input_dims);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= gx.size()) fail(ErrorCode::ShapeMismatch, "argmax index outside input");
    gx[argmax[i]] += grad_out[i];
  }
  return gx;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> y = x;
  for (auto& v : y.data()) v = v > T{0} ? v : T{0};
  return y;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out) {
  require_same_dims(x.dims(), grad_out.dims(), "relu_backward");
  BasicTensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(x[i] > T{0})) g[i] = T{0};
  return g;
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const LinearParams<T>& p) {
  check_linear(x, p);
  const auto n = static_cast<Eigen::Index>(x.dim(0));
  const auto in = static_cast<Eigen::Index>(x.dim(1));
  const auto out = static_cast<Eigen::Index>(p.weights.dim(0));
  BasicTensor<T> y({x.dim(0), p.weights.dim(0)});
  MutMap<T> ym(y.ptr(), n, out);
  ym.noalias() = ConstMap<T>(x.ptr(), n, in) * ConstMap<T>(p.weights.ptr(), out, in).transpose();
  ym.rowwise() += ConstVec<T>(p.bias.ptr(), out).transpose();
  return y;
}

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& x, const LinearParams<T>& p, const BasicTensor<T>& grad_out) {
  check_linear(x, p);
  require_same_dims(grad_out.dims(), {x.dim(0), p.weights.dim(0)}, "linear grad_out");
  const auto n = static_cast<Eigen::Index>(x.dim(0));
  const auto in = static_cast<Eigen::Index>(x.dim(1));
  const auto out = static_cast<Eigen::Index>(p.weights.dim(0));
  LinearGrads<T> g{BasicTensor<T>(x.dims()), BasicTensor<T>(p.weights.dims()), BasicTensor<T>(p.bias.dims())};
  ConstMap<T> gy(grad_out.ptr(), n, out);
  MutMap<T>(g.input.ptr(), n, in).noalias() = gy * ConstMap<T>(p.weights.ptr(), out, in);
  MutMap<T>(g.weights.ptr(), out, in).noalias() = gy.transpose() * ConstMap<T>(x.ptr(), n, in);
  MutVec<T>(g.bias.ptr(), out) = gy.colwise().sum().transpose();
  return g;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 2) fail(ErrorCode::ShapeMismatch, "softmax expects [N,K] logits");
  BasicTensor<T> p = logits;
  const std::size_t k = logits.dim(1);
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    T* row = p.ptr() + r * k;
    const T mx = *std::max_element(row, row + k);
    T sum{0};
    for (std::size_t j = 0; j < k; ++j) sum += (row[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < k; ++j) row[j] /= sum;
  }
  return p;
}

template <typename T>
XentResult<T> softmax_xent(const BasicTensor<T>& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2) fail(ErrorCode::ShapeMismatch, "softmax_xent expects [N,K] logits");
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.dim(1);
  if (labels.size() != n) fail(ErrorCode::ShapeMismatch, "label count differs from batch size");
  for (auto l : labels)
    if (l >= k) fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(l) + " with " + std::to_string(k) + " classes");

  XentResult<T> r{T{0}, BasicTensor<T>(logits.dims()), softmax(logits)};
  const T inv_n = T{1} / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.ptr() + i * k;
    const T mx = *std::max_element(z, z + k);
    T sum{0};
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
    r.loss += (std::log(sum) + mx - z[labels[i]]) * inv_n;
    for (std::size_t j = 0; j < k; ++j) {
      r.grad[i * k + j] = (r.probs[i * k + j] - (j == labels[i] ? T{1} : T{0})) * inv_n;
    }
  }
  return r;
}

#define TCDC_INSTANTIATE(T)                                                                                      \
  template PoolResult<T> maxpool3d(const BasicTensor<T>&, const PoolSpec&);                                      \
  template BasicTensor<T> maxpool3d_backward(const BasicTensor<T>&, std::span<const std::size_t>, const Shape&); \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                                           \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> linear(const BasicTensor<T>&, const LinearParams<T>&);                                 \
  template LinearGrads<T> linear_backward(const BasicTensor<T>&, const LinearParams<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                                        \
  template XentResult<T> softmax_xent(const BasicTensor<T>&, std::span<const std::size_t>);

TCDC_INSTANTIATE(float)
TCDC_INSTANTIATE(double)
#undef TCDC_INSTANTIATE

}  // namespace tcdc
