#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tcdc/tensor.hpp"

namespace tcdc {

struct FlowParams {
  double alpha = 1.0;
  std::size_t iters = 100;
};

/// Dense displacement field: uv [2, H, W], u to the right, v downward, in pixels.
struct FlowField {
  Tensor uv;

  std::size_t height() const { return uv.dim(1); }
  std::size_t width() const { return uv.dim(2); }
};

/// 0.299 R + 0.587 G + 0.114 B for [3, H, W]; [H, W] and [1, H, W] pass through as [H, W].
Tensor to_luma(const Tensor& frame);

/// Horn-Schunck flow by Jacobi iteration. Image gradients are central
/// differences (one-sided at the border) averaged over both frames; the
/// smoothness term uses the 4-neighbour mean with replicated borders.
FlowField horn_schunck(const Tensor& prev, const Tensor& next, double alpha, std::size_t iters);

/// Flow for each consecutive pair: k frames give k-1 fields, or k fields with
/// the last one repeated when pad_to_length is set.
std::vector<FlowField> flow_sequence(std::span<const Tensor> frames, const FlowParams& params,
                                     bool pad_to_length = false);

inline constexpr float kFlowClamp = 8.0f;

/// Clamp to [-8, 8] px and scale by 1/8 into [-1, 1].
Tensor flow_to_unit_range(const FlowField& flow);

/// Stacks fields into [T, 2, H, W].
Tensor stack_flow(std::span<const FlowField> fields, bool unit_range);

/// Mean |(u,v) - (u0,v0)| over pixels at least `margin` away from the border.
double mean_endpoint_error(const FlowField& flow, double u0, double v0, std::size_t margin);

/// Mean of one flow component (0 = u, 1 = v) over the interior.
double mean_flow_component(const FlowField& flow, std::size_t component, std::size_t margin);

}  // namespace tcdc
