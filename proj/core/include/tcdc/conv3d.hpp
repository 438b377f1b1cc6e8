#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tcdc/tensor.hpp"

namespace tcdc {

struct Extent3 {
  std::size_t t = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t volume() const noexcept { return t * h * w; }
  bool operator==(const Extent3&) const = default;
};

/// Geometry and theta of one temporal central difference convolution.
///
/// The kernel cube is split into the current-moment slice (temporal offset 0
/// of the centered kernel) and the adjacent-moment slices (every other
/// temporal offset). Only the adjacent slices feed the central difference
/// term, and they share their weights with the ordinary convolution.
struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  Extent3 kernel{3, 3, 3};
  Extent3 stride{1, 1, 1};
  Extent3 padding{1, 1, 1};
  double theta = 0.0;

  /// Throws InvalidSpec (zero channels/stride, even or zero kernel extent)
  /// or ThetaOutOfRange.
  void validate() const;

  std::size_t kernel_volume() const noexcept { return kernel.volume(); }

  /// Flat kernel-cube offset (kt*kH + kh)*kW + kw of the kernel center.
  std::size_t center_offset() const noexcept;
  bool in_current_slice(std::size_t kernel_offset) const noexcept;
  std::vector<std::size_t> current_slice_offsets() const;
  std::vector<std::size_t> adjacent_slice_offsets() const;

  /// Output extent for an input extent; throws EmptyOutput if any axis < 1.
  Extent3 output_extent(const Extent3& input) const;

  bool operator==(const ConvSpec&) const = default;
};

template <typename T>
struct ConvParams {
  BasicTensor<T> weights;  // [out, in, kT, kH, kW]
  BasicTensor<T> bias;     // [out]

  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }
};

/// Zero weights and bias shaped for the spec.
template <typename T>
ConvParams<T> conv_params_zero(const ConvSpec& spec);

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;    // empty when not requested
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

/// Plain 3D convolution over x [N, C, T, H, W]; spec.theta is ignored.
template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& x, const ConvParams<T>& p, const ConvSpec& spec);

/// Convolution plus theta times the temporal central difference term:
///   y(p0) = sum_C w(pn) x(p0+pn) - theta * sum_c x_c(p0) * sum_{adjacent} w_c(pn) + b.
template <typename T>
BasicTensor<T> tcdc_forward(const BasicTensor<T>& x, const ConvParams<T>& p, const ConvSpec& spec);

template <typename T>
ConvGrads<T> tcdc_backward(const BasicTensor<T>& x, const ConvParams<T>& p, const ConvSpec& spec,
                           const BasicTensor<T>& grad_out, bool need_input_grad = true);

/// The weight tensor with theta folded into each filter's center tap. The CD
/// term reads the center input value, so the layer is an ordinary convolution
/// with these weights.
template <typename T>
BasicTensor<T> fold_center_difference(const BasicTensor<T>& weights, const ConvSpec& spec);

}  // namespace tcdc
