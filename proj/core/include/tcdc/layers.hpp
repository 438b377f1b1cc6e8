#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tcdc/conv3d.hpp"
#include "tcdc/tensor.hpp"

namespace tcdc {

struct PoolSpec {
  Extent3 window{1, 2, 2};
  Extent3 stride{1, 2, 2};

  Extent3 output_extent(const Extent3& input) const;
  bool operator==(const PoolSpec&) const = default;
};

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// Max pooling over [N, C, T, H, W] without padding. Ties go to the first
/// element in scan order.
template <typename T>
PoolResult<T> maxpool3d(const BasicTensor<T>& x, const PoolSpec& spec);

template <typename T>
BasicTensor<T> maxpool3d_backward(const BasicTensor<T>& grad_out, std::span<const std::size_t> argmax,
                                  const Shape& input_dims);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

/// Gradient of relu given its input x.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out);

template <typename T>
struct LinearParams {
  BasicTensor<T> weights;  // [out, in]
  BasicTensor<T> bias;     // [out]
};

template <typename T>
struct LinearGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

/// y = x W^T + b for x [N, in].
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const LinearParams<T>& p);

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& x, const LinearParams<T>& p, const BasicTensor<T>& grad_out);

/// Row-wise softmax of [N, K] logits, max-subtracted.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

template <typename T>
struct XentResult {
  T loss;                  // mean over the batch
  BasicTensor<T> grad;     // d loss / d logits
  BasicTensor<T> probs;
};

template <typename T>
XentResult<T> softmax_xent(const BasicTensor<T>& logits, std::span<const std::size_t> labels);

}  // namespace tcdc
