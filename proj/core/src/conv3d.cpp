#include "tcdc/conv3d.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <utility>
#include <string>

namespace tcdc {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Column buffers are sized so one chunk of output slices stays near 16 MB.
constexpr std::size_t kColBudget = std::size_t{1} << 22;

struct Geometry {
  std::size_t batch, channels;
  Extent3 in, out;
  std::size_t rows;  // channels * kernel volume
};

Geometry geometry_for(const Shape& xdims, const ConvSpec& spec) {
  spec.validate();
  if (xdims.size() != 5) fail(ErrorCode::ShapeMismatch, "conv input must be rank 5 [N,C,T,H,W]");
  if (xdims[1] != spec.in_channels) {
    fail(ErrorCode::ShapeMismatch, "conv input has " + std::to_string(xdims[1]) + " channels, spec expects " +
                                       std::to_string(spec.in_channels));
  }
  Geometry g{};
  g.batch = xdims[0];
  g.channels = xdims[1];
  g.in = {xdims[2], xdims[3], xdims[4]};
  g.out = spec.output_extent(g.in);
  g.rows = g.channels * spec.kernel_volume();
  return g;
}

template <typename T>
void check_params(const ConvParams<T>& p, const ConvSpec& spec) {
  require_same_dims(p.weights.dims(),
                    {spec.out_channels, spec.in_channels, spec.kernel.t, spec.kernel.h, spec.kernel.w},
                    "conv weights");
  require_same_dims(p.bias.dims(), {spec.out_channels}, "conv bias");
}

inline bool inside(std::ptrdiff_t i, std::size_t n) { return i >= 0 && i < static_cast<std::ptrdiff_t>(n); }

// Output columns [lo, hi) whose input column for kernel tap kw lies inside the row.
inline std::pair<std::size_t, std::size_t> valid_columns(const Geometry& g, const ConvSpec& spec, std::size_t kw) {
  const std::size_t sw = spec.stride.w, pw = spec.padding.w;
  if (kw >= g.in.w + pw) return {0, 0};
  const std::size_t lo = kw >= pw ? 0 : (pw - kw + sw - 1) / sw;
  // wo * sw + kw - pw < in.w  <=>  wo * sw < in.w + pw - kw
  const std::size_t limit = g.in.w + pw - kw;
  const std::size_t hi = std::min(g.out.w, (limit + sw - 1) / sw);
  return {std::min(lo, hi), hi};
}

// Gathers the receptive fields of output slices [t0, t1) into col (rows x cols).
template <typename T>
void im2col(const T* x, const Geometry& g, const ConvSpec& spec, std::size_t t0, std::size_t t1, T* col) {
  const std::size_t plane = g.out.h * g.out.w;
  const std::size_t cols = (t1 - t0) * plane;
  const auto& k = spec.kernel;
  const auto& s = spec.stride;
  const auto& pd = spec.padding;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* xc = x + c * g.in.volume();
    for (std::size_t kt = 0; kt < k.t; ++kt)
      for (std::size_t kh = 0; kh < k.h; ++kh)
        for (std::size_t kw = 0; kw < k.w; ++kw) {
          const std::size_t row = ((c * k.t + kt) * k.h + kh) * k.w + kw;
          T* dst = col + row * cols;
          for (std::size_t to = t0; to < t1; ++to) {
            const auto ti = static_cast<std::ptrdiff_t>(to * s.t + kt) - static_cast<std::ptrdiff_t>(pd.t);
            for (std::size_t ho = 0; ho < g.out.h; ++ho, dst += g.out.w) {
              const auto hi = static_cast<std::ptrdiff_t>(ho * s.h + kh) - static_cast<std::ptrdiff_t>(pd.h);
              if (!inside(ti, g.in.t) || !inside(hi, g.in.h)) {
                std::fill(dst, dst + g.out.w, T{0});
                continue;
              }
              const T* src = xc + (static_cast<std::size_t>(ti) * g.in.h + static_cast<std::size_t>(hi)) * g.in.w;
              const auto [lo, hi_w] = valid_columns(g, spec, kw);
              std::fill(dst, dst + lo, T{0});
              if (s.w == 1) {
                std::copy(src + lo + kw - pd.w, src + hi_w + kw - pd.w, dst + lo);
              } else {
                for (std::size_t wo = lo; wo < hi_w; ++wo) dst[wo] = src[wo * s.w + kw - pd.w];
              }
              std::fill(dst + hi_w, dst + g.out.w, T{0});
            }
          }
        }
  }
}

// Scatter-adds col back onto the input grid; the adjoint of im2col.
template <typename T>
void col2im_add(const T* col, const Geometry& g, const ConvSpec& spec, std::size_t t0, std::size_t t1, T* x) {
  const std::size_t cols = (t1 - t0) * g.out.h * g.out.w;
  const auto& k = spec.kernel;
  const auto& s = spec.stride;
  const auto& pd = spec.padding;
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* xc = x + c * g.in.volume();
    for (std::size_t kt = 0; kt < k.t; ++kt)
      for (std::size_t kh = 0; kh < k.h; ++kh)
        for (std::size_t kw = 0; kw < k.w; ++kw) {
          const std::size_t row = ((c * k.t + kt) * k.h + kh) * k.w + kw;
          const T* src = col + row * cols;
          for (std::size_t to = t0; to < t1; ++to) {
            const auto ti = static_cast<std::ptrdiff_t>(to * s.t + kt) - static_cast<std::ptrdiff_t>(pd.t);
            for (std::size_t ho = 0; ho < g.out.h; ++ho, src += g.out.w) {
              const auto hi = static_cast<std::ptrdiff_t>(ho * s.h + kh) - static_cast<std::ptrdiff_t>(pd.h);
              if (!inside(ti, g.in.t) || !inside(hi, g.in.h)) continue;
              T* dst = xc + (static_cast<std::size_t>(ti) * g.in.h + static_cast<std::size_t>(hi)) * g.in.w;
              const auto [lo, hi_w] = valid_columns(g, spec, kw);
              if (s.w == 1) {
                T* d = dst + kw - pd.w;
                for (std::size_t wo = lo; wo < hi_w; ++wo) d[wo] += src[wo];
              } else {
                for (std::size_t wo = lo; wo < hi_w; ++wo) dst[wo * s.w + kw - pd.w] += src[wo];
              }
            }
          }
        }
  }
}

std::size_t slices_per_chunk(const Geometry& g) {
  const std::size_t per_slice = g.rows * g.out.h * g.out.w;
  return std::clamp<std::size_t>(kColBudget / std::max<std::size_t>(per_slice, 1), 1, g.out.t);
}

template <typename T>
BasicTensor<T> conv_with_weights(const BasicTensor<T>& x, const BasicTensor<T>& weights, const BasicTensor<T>& bias,
                                 const ConvSpec& spec) {
  const Geometry g = geometry_for(x.dims(), spec);
  const std::size_t plane = g.out.h * g.out.w;
  const std::size_t out_vol = g.out.volume();
  BasicTensor<T> y({g.batch, spec.out_channels, g.out.t, g.out.h, g.out.w});
  const std::size_t chunk = slices_per_chunk(g);
  std::vector<T> col(g.rows * chunk * plane);
  ConstMatMap<T> w(weights.ptr(), static_cast<Eigen::Index>(spec.out_channels), static_cast<Eigen::Index>(g.rows),
                   Eigen::OuterStride<>(static_cast<Eigen::Index>(g.rows)));
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* xn = x.ptr() + n * g.channels * g.in.volume();
    T* yn = y.ptr() + n * spec.out_channels * out_vol;
    for (std::size_t t0 = 0; t0 < g.out.t; t0 += chunk) {
      const std::size_t t1 = std::min(g.out.t, t0 + chunk);
      const auto cols = static_cast<Eigen::Index>((t1 - t0) * plane);
      im2col(xn, g, spec, t0, t1, col.data());
      ConstMatMap<T> cm(col.data(), static_cast<Eigen::Index>(g.rows), cols, Eigen::OuterStride<>(cols));
      MatMap<T> ym(yn + t0 * plane, static_cast<Eigen::Index>(spec.out_channels), cols,
                   Eigen::OuterStride<>(static_cast<Eigen::Index>(out_vol)));
      ym.noalias() = w * cm;
    }
    for (std::size_t o = 0; o < spec.out_channels; ++o) {
      const T b = bias[o];
      T* yo = yn + o * out_vol;
      for (std::size_t i = 0; i < out_vol; ++i) yo[i] += b;
    }
  }
  return y;
}

}  // namespace

void ConvSpec::validate() const {
  if (in_channels == 0 || out_channels == 0) fail(ErrorCode::InvalidSpec, "channel counts must be positive");
  for (auto kd : {kernel.t, kernel.h, kernel.w}) {
    if (kd == 0 || kd % 2 == 0) fail(ErrorCode::InvalidSpec, "kernel extents must be odd and positive");
  }
  if (stride.t == 0 || stride.h == 0 || stride.w == 0) fail(ErrorCode::InvalidSpec, "stride must be positive");
  if (!(theta >= 0.0 && theta <= 1.0)) fail(ErrorCode::ThetaOutOfRange, "theta " + std::to_string(theta));
}

std::size_t ConvSpec::center_offset() const noexcept {
  return ((kernel.t / 2) * kernel.h + kernel.h / 2) * kernel.w + kernel.w / 2;
}

bool ConvSpec::in_current_slice(std::size_t kernel_offset) const noexcept {
  return kernel_offset / (kernel.h * kernel.w) == kernel.t / 2;
}

std::vector<std::size_t> ConvSpec::current_slice_offsets() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kernel_volume(); ++i)
    if (in_current_slice(i)) out.push_back(i);
  return out;
}

std::vector<std::size_t> ConvSpec::adjacent_slice_offsets() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kernel_volume(); ++i)
    if (!in_current_slice(i)) out.push_back(i);
  return out;
}

Extent3 ConvSpec::output_extent(const Extent3& input) const {
  auto axis = [](std::size_t d, std::size_t k, std::size_t s, std::size_t p, const char* name) {
    if (d + 2 * p < k) fail(ErrorCode::EmptyOutput, std::string("kernel exceeds padded input on axis ") + name);
    return (d + 2 * p - k) / s + 1;
  };
  return {axis(input.t, kernel.t, stride.t, padding.t, "T"), axis(input.h, kernel.h, stride.h, padding.h, "H"),
          axis(input.w, kernel.w, stride.w, padding.w, "W")};
}

template <typename T>
ConvParams<T> conv_params_zero(const ConvSpec& spec) {
  spec.validate();
  return {BasicTensor<T>({spec.out_channels, spec.in_channels, spec.kernel.t, spec.kernel.h, spec.kernel.w}),
          BasicTensor<T>({spec.out_channels})};
}

template <typename T>
BasicTensor<T> fold_center_difference(const BasicTensor<T>& weights, const ConvSpec& spec) {
  BasicTensor<T> folded = weights;
  if (spec.theta == 0.0) return folded;
  const std::size_t kv = spec.kernel_volume();
  const std::size_t center = spec.center_offset();
  const T theta = static_cast<T>(spec.theta);
  const std::size_t filters = spec.out_channels * spec.in_channels;
  for (std::size_t f = 0; f < filters; ++f) {
    const T* wf = weights.ptr() + f * kv;
    T adjacent_sum{0};
    for (std::size_t i = 0; i < kv; ++i)
      if (!spec.in_current_slice(i)) adjacent_sum += wf[i];
    folded[f * kv + center] -= theta * adjacent_sum;
  }
  return folded;
}

template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& x, const ConvParams<T>& p, const ConvSpec& spec) {
  check_params(p, spec);
  return conv_with_weights(x, p.weights, p.bias, spec);
}

template <typename T>
BasicTensor<T> tcdc_forward(const BasicTensor<T>& x, const ConvParams<T>& p, const ConvSpec& spec) {
  spec.validate();
  check_params(p, spec);
  return conv_with_weights(x, fold_center_difference(p.weights, spec), p.bias, spec);
}

template <typename T>
ConvGrads<T> tcdc_backward(const BasicTensor<T>& x, const ConvParams<T>& p, const ConvSpec& spec,
                           const BasicTensor<T>& grad_out, bool need_input_grad) {
  check_params(p, spec);
  const Geometry g = geometry_for(x.dims(), spec);
  require_same_dims(grad_out.dims(), {g.batch, spec.out_channels, g.out.t, g.out.h, g.out.w}, "tcdc grad_out");

  const BasicTensor<T> folded = fold_center_difference(p.weights, spec);
  const std::size_t plane = g.out.h * g.out.w;
  const std::size_t out_vol = g.out.volume();
  const auto outc = static_cast<Eigen::Index>(spec.out_channels);
  const auto rows = static_cast<Eigen::Index>(g.rows);

  ConvGrads<T> grads;
  grads.weights = BasicTensor<T>(p.weights.dims());
  grads.bias = BasicTensor<T>({spec.out_channels});
  if (need_input_grad) grads.input = BasicTensor<T>(x.dims());

  const std::size_t chunk = slices_per_chunk(g);
  std::vector<T> col(g.rows * chunk * plane);
  std::vector<T> grad_col(need_input_grad ? col.size() : 0);
  ConstMatMap<T> w(folded.ptr(), outc, rows, Eigen::OuterStride<>(rows));
  MatMap<T> gw(grads.weights.ptr(), outc, rows, Eigen::OuterStride<>(rows));

  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* xn = x.ptr() + n * g.channels * g.in.volume();
    const T* gn = grad_out.ptr() + n * spec.out_channels * out_vol;
    for (std::size_t t0 = 0; t0 < g.out.t; t0 += chunk) {
      const std::size_t t1 = std::min(g.out.t, t0 + chunk);
      const auto cols = static_cast<Eigen::Index>((t1 - t0) * plane);
      im2col(xn, g, spec, t0, t1, col.data());
      ConstMatMap<T> cm(col.data(), rows, cols, Eigen::OuterStride<>(cols));
      ConstMatMap<T> gm(gn + t0 * plane, outc, cols, Eigen::OuterStride<>(static_cast<Eigen::Index>(out_vol)));
      gw.noalias() += gm * cm.transpose();
      if (need_input_grad) {
        MatMap<T> gc(grad_col.data(), rows, cols, Eigen::OuterStride<>(cols));
        gc.noalias() = w.transpose() * gm;
        col2im_add(grad_col.data(), g, spec, t0, t1, grads.input.ptr() + n * g.channels * g.in.volume());
      }
    }
    for (std::size_t o = 0; o < spec.out_channels; ++o) {
      const T* go = gn + o * out_vol;
      T acc{0};
      for (std::size_t i = 0; i < out_vol; ++i) acc += go[i];
      grads.bias[o] += acc;
    }
  }

  // Chain rule through the folded center tap: each adjacent-slice weight also
  // enters the center tap with coefficient -theta.
  if (spec.theta != 0.0) {
    const std::size_t kv = spec.kernel_volume();
    const std::size_t center = spec.center_offset();
    const T theta = static_cast<T>(spec.theta);
    for (std::size_t f = 0; f < spec.out_channels * spec.in_channels; ++f) {
      T* gf = grads.weights.ptr() + f * kv;
      const T center_grad = gf[center];
      for (std::size_t i = 0; i < kv; ++i)
        if (!spec.in_current_slice(i)) gf[i] -= theta * center_grad;
    }
  }
  return grads;
}

#define TCDC_INSTANTIATE(T)                                                                                  \
  template ConvParams<T> conv_params_zero<T>(const ConvSpec&);                                               \
  template BasicTensor<T> fold_center_difference(const BasicTensor<T>&, const ConvSpec&);                   \
  template BasicTensor<T> conv3d_forward(const BasicTensor<T>&, const ConvParams<T>&, const ConvSpec&);     \
  template BasicTensor<T> tcdc_forward(const BasicTensor<T>&, const ConvParams<T>&, const ConvSpec&);       \
  template ConvGrads<T> tcdc_backward(const BasicTensor<T>&, const ConvParams<T>&, const ConvSpec&,         \
                                      const BasicTensor<T>&, bool);

TCDC_INSTANTIATE(float)
TCDC_INSTANTIATE(double)
#undef TCDC_INSTANTIATE

}  // namespace tcdc
