#include "tcdc/optflow.hpp"

#include <algorithm>
#include <cmath>

namespace tcdc {

namespace {

// Central difference along one axis of a row-major [H, W] grid, one-sided at the ends.
void gradients(const std::vector<double>& img, std::size_t h, std::size_t w, std::vector<double>& gx,
               std::vector<double>& gy) {
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      if (w == 1) {
        gx[i] = 0.0;
      } else if (x == 0) {
        gx[i] = img[i + 1] - img[i];
      } else if (x == w - 1) {
        gx[i] = img[i] - img[i - 1];
      } else {
        gx[i] = 0.5 * (img[i + 1] - img[i - 1]);
      }
      if (h == 1) {
        gy[i] = 0.0;
      } else if (y == 0) {
        gy[i] = img[i + w] - img[i];
      } else if (y == h - 1) {
        gy[i] = img[i] - img[i - w];
      } else {
        gy[i] = 0.5 * (img[i + w] - img[i - w]);
      }
    }
}

void neighbour_mean(const std::vector<double>& f, std::size_t h, std::size_t w, std::vector<double>& out) {
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t up = y == 0 ? 0 : y - 1;
    const std::size_t down = y + 1 == h ? y : y + 1;
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t left = x == 0 ? 0 : x - 1;
      const std::size_t right = x + 1 == w ? x : x + 1;
      out[y * w + x] = 0.25 * (f[up * w + x] + f[down * w + x] + f[y * w + left] + f[y * w + right]);
    }
  }
}

}  // namespace

Tensor to_luma(const Tensor& frame) {
  if (frame.rank() == 2) return frame;
  if (frame.rank() != 3 || (frame.dim(0) != 1 && frame.dim(0) != 3)) {
    fail(ErrorCode::ShapeMismatch, "expected a [H,W], [1,H,W] or [3,H,W] frame");
  }
  const std::size_t h = frame.dim(1), w = frame.dim(2), n = h * w;
  Tensor out({h, w});
  if (frame.dim(0) == 1) {
    std::copy(frame.ptr(), frame.ptr() + n, out.ptr());
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = 0.299f * frame[i] + 0.587f * frame[n + i] + 0.114f * frame[2 * n + i];
  }
  return out;
}

FlowField horn_schunck(const Tensor& prev, const Tensor& next, double alpha, std::size_t iters) {
  if (prev.rank() != 2) fail(ErrorCode::ShapeMismatch, "horn_schunck expects [H,W] grayscale frames");
  require_same_dims(prev.dims(), next.dims(), "horn_schunck");
  if (!(alpha > 0.0)) fail(ErrorCode::InvalidSpec, "alpha must be positive");
  if (iters == 0) fail(ErrorCode::InvalidSpec, "iters must be at least 1");

  const std::size_t h = prev.dim(0), w = prev.dim(1), n = h * w;
  std::vector<double> a(prev.data().begin(), prev.data().end());
  std::vector<double> b(next.data().begin(), next.data().end());
  std::vector<double> ax(n), ay(n), bx(n), by(n);
  gradients(a, h, w, ax, ay);
  gradients(b, h, w, bx, by);

  std::vector<double> ix(n), iy(n), it(n), denom(n);
  const double a2 = alpha * alpha;
  for (std::size_t i = 0; i < n; ++i) {
    ix[i] = 0.5 * (ax[i] + bx[i]);
    iy[i] = 0.5 * (ay[i] + by[i]);
    it[i] = b[i] - a[i];
    denom[i] = a2 + ix[i] * ix[i] + iy[i] * iy[i];
  }

  std::vector<double> u(n, 0.0), v(n, 0.0), ub(n), vb(n);
  for (std::size_t k = 0; k < iters; ++k) {
    neighbour_mean(u, h, w, ub);
    neighbour_mean(v, h, w, vb);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = (ix[i] * ub[i] + iy[i] * vb[i] + it[i]) / denom[i];
      u[i] = ub[i] - ix[i] * r;
      v[i] = vb[i] - iy[i] * r;
    }
  }

  FlowField f{Tensor({2, h, w})};
  for (std::size_t i = 0; i < n; ++i) {
    f.uv[i] = static_cast<float>(u[i]);
    f.uv[n + i] = static_cast<float>(v[i]);
  }
  return f;
}

std::vector<FlowField> flow_sequence(std::span<const Tensor> frames, const FlowParams& params, bool pad_to_length) {
  if (frames.size() < 2) fail(ErrorCode::EmptySequence, "flow needs at least two frames");
  std::vector<Tensor> luma;
  luma.reserve(frames.size());
  for (const auto& f : frames) luma.push_back(to_luma(f));
  std::vector<FlowField> out;
  out.reserve(frames.size());
  for (std::size_t t = 0; t + 1 < luma.size(); ++t) {
    out.push_back(horn_schunck(luma[t], luma[t + 1], params.alpha, params.iters));
  }
  if (pad_to_length) out.push_back(out.back());
  return out;
}

Tensor flow_to_unit_range(const FlowField& flow) {
  Tensor out = flow.uv;
  for (auto& x : out.data()) x = std::clamp(x, -kFlowClamp, kFlowClamp) / kFlowClamp;
  return out;
}

Tensor stack_flow(std::span<const FlowField> fields, bool unit_range) {
  if (fields.empty()) fail(ErrorCode::EmptySequence, "no flow fields to stack");
  const Shape& d = fields.front().uv.dims();
  Tensor out({fields.size(), d[0], d[1], d[2]});
  const std::size_t per = fields.front().uv.size();
  for (std::size_t t = 0; t < fields.size(); ++t) {
    require_same_dims(fields[t].uv.dims(), d, "stack_flow");
    const Tensor src = unit_range ? flow_to_unit_range(fields[t]) : fields[t].uv;
    std::copy(src.ptr(), src.ptr() + per, out.ptr() + t * per);
  }
  return out;
}

double mean_endpoint_error(const FlowField& flow, double u0, double v0, std::size_t margin) {
  const std::size_t h = flow.height(), w = flow.width(), n = h * w;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t y = margin; y + margin < h; ++y)
    for (std::size_t x = margin; x + margin < w; ++x) {
      const std::size_t i = y * w + x;
      sum += std::hypot(flow.uv[i] - u0, flow.uv[n + i] - v0);
      ++count;
    }
  if (count == 0) fail(ErrorCode::EmptyOutput, "margin leaves no interior pixels");
  return sum / static_cast<double>(count);
}

double mean_flow_component(const FlowField& flow, std::size_t component, std::size_t margin) {
  const std::size_t h = flow.height(), w = flow.width(), n = h * w;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t y = margin; y + margin < h; ++y)
    for (std::size_t x = margin; x + margin < w; ++x) {
      sum += flow.uv[component * n + y * w + x];
      ++count;
    }
  if (count == 0) fail(ErrorCode::EmptyOutput, "margin leaves no interior pixels");
  return sum / static_cast<double>(count);
}

}  // namespace tcdc
