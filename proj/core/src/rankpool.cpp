#include "tcdc/rankpool.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace tcdc {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<Tensor> prefix_means(std::span<const Tensor> frames) {
  if (frames.empty()) fail(ErrorCode::EmptySequence, "prefix_means needs at least one frame");
  const Shape& dims = frames.front().dims();
  std::vector<double> running(frames.front().size(), 0.0);
  std::vector<Tensor> out;
  out.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    require_same_dims(frames[t].dims(), dims, "prefix_means");
    Tensor mean(dims);
    const double inv = 1.0 / static_cast<double>(t + 1);
    for (std::size_t i = 0; i < running.size(); ++i) {
      running[i] += frames[t][i];
      mean[i] = static_cast<float>(running[i] * inv);
    }
    out.push_back(std::move(mean));
  }
  return out;
}

RankPoolProblem RankPoolProblem::from_frames(std::span<const Tensor> frames, double delta) {
  RankPoolProblem p{tcdc::prefix_means(frames), delta};
  p.validate();
  return p;
}

void RankPoolProblem::validate() const {
  if (prefix_means.empty()) fail(ErrorCode::EmptySequence, "rank pooling needs k >= 1");
  for (const auto& m : prefix_means) require_same_dims(m.dims(), prefix_means.front().dims(), "rank pooling");
  if (!(delta > 0.0)) fail(ErrorCode::InvalidSpec, "delta must be positive");
}

double rank_slack_sum(const RankPoolProblem& problem, const Tensor& omega) {
  problem.validate();
  require_same_dims(omega.dims(), problem.prefix_means.front().dims(), "rank_slack_sum");
  const std::size_t k = problem.prefix_means.size();
  std::vector<double> proj(k, 0.0);
  for (std::size_t t = 0; t < k; ++t) {
    const auto& m = problem.prefix_means[t];
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += static_cast<double>(omega[i]) * m[i];
    proj[t] = s;
  }
  double slack = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < i; ++j) slack += std::max(0.0, 1.0 - (proj[i] - proj[j]));
  return slack;
}

double rank_objective(const RankPoolProblem& problem, const Tensor& omega) {
  double norm2 = 0.0;
  for (float v : omega.data()) norm2 += static_cast<double>(v) * v;
  return 0.5 * norm2 + problem.delta * rank_slack_sum(problem, omega);
}

RankPoolSolution rank_svm_solve(const RankPoolProblem& problem, const SolverConfig& cfg) {
  problem.validate();
  const std::size_t k = problem.prefix_means.size();
  const Shape& dims = problem.prefix_means.front().dims();
  const std::size_t dim = problem.prefix_means.front().size();
  RankPoolSolution sol;
  sol.image.d = Tensor(dims, 0.0f);

  if (k == 1) {
    sol.objective = 0.0;
    sol.best_objective = {0.0};
    return sol;
  }

  // Basis: consecutive differences D_q = I_{q+1} - I_q, q = 0..k-2. The pair
  // (a > b) has difference vector sum_{q=b}^{a-1} D_q.
  const std::size_t nb = k - 1;
  std::vector<std::vector<double>> diffs(nb, std::vector<double>(dim));
  for (std::size_t q = 0; q < nb; ++q) {
    const auto& lo = problem.prefix_means[q];
    const auto& hi = problem.prefix_means[q + 1];
    for (std::size_t i = 0; i < dim; ++i) diffs[q][i] = static_cast<double>(hi[i]) - static_cast<double>(lo[i]);
  }
  std::vector<double> gram(nb * nb);
  for (std::size_t a = 0; a < nb; ++a)
    for (std::size_t b = 0; b <= a; ++b) gram[a * nb + b] = gram[b * nb + a] = dot(diffs[a], diffs[b]);

  const double delta = problem.delta;
  const double pairs = static_cast<double>(problem.pair_count());
  std::vector<double> coef(nb, 0.0), avg(nb, 0.0), best_coef(nb, 0.0), gc(nb), prefix(nb + 1), active(nb);
  double best = std::numeric_limits<double>::infinity();
  double weight = 0.0;

  // Objective at c; leaves the hinge activity of each basis direction in `active`.
  auto evaluate = [&](const std::vector<double>& c) {
    for (std::size_t a = 0; a < nb; ++a) gc[a] = dot({&gram[a * nb], nb}, c);
    prefix[0] = 0.0;
    for (std::size_t q = 0; q < nb; ++q) prefix[q + 1] = prefix[q] + gc[q];
    double hinge = 0.0;
    std::fill(active.begin(), active.end(), 0.0);
    for (std::size_t a = 1; a < k; ++a)
      for (std::size_t b = 0; b < a; ++b) {
        const double margin = 1.0 - (prefix[a] - prefix[b]);
        if (margin > 0.0) {
          hinge += margin;
          for (std::size_t q = b; q < a; ++q) active[q] += 1.0;
        }
      }
    return 0.5 * dot(c, gc) + delta * hinge;
  };

  // The step-weighted average of all iterates converges where the raw
  // subgradient iterate keeps oscillating; it also drives the stopping rule.
  std::vector<double> settled;
  double settled_best = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  for (; it < cfg.max_iters; ++it) {
    if (it > 0) {
      const double fa = evaluate(avg);
      if (fa < best) {
        best = fa;
        best_coef = avg;
      }
      settled_best = std::min(settled_best, fa);
    }
    const double f = evaluate(coef);
    if (f < best) {
      best = f;
      best_coef = coef;
    }
    if (it == 0) settled_best = f;
    sol.best_objective.push_back(best);
    settled.push_back(settled_best);

    if (it >= cfg.patience) {
      const double old = settled[it - cfg.patience];
      if (old - settled_best <= cfg.tol * std::max(std::abs(old), 1e-12)) {
        ++it;
        break;
      }
    }

    const double step = 1.0 / (static_cast<double>(it) + pairs);
    for (std::size_t q = 0; q < nb; ++q) coef[q] -= step * (coef[q] - delta * active[q]);
    weight += step;
    for (std::size_t q = 0; q < nb; ++q) avg[q] += (step / weight) * (coef[q] - avg[q]);
  }
  sol.iterations = it;

  std::vector<double> omega(dim, 0.0);
  for (std::size_t q = 0; q < nb; ++q) {
    if (best_coef[q] == 0.0) continue;
    for (std::size_t i = 0; i < dim; ++i) omega[i] += best_coef[q] * diffs[q][i];
  }
  for (std::size_t i = 0; i < dim; ++i) sol.image.d[i] = static_cast<float>(omega[i]);
  sol.objective = rank_objective(problem, sol.image.d);
  return sol;
}

std::vector<DynamicImage> dynamic_image_sequence(std::span<const Tensor> frames, std::size_t window,
                                                 std::size_t stride, double delta, const SolverConfig& cfg) {
  if (window == 0 || stride == 0) fail(ErrorCode::InvalidSpec, "window and stride must be positive");
  if (window > frames.size()) {
    fail(ErrorCode::WindowTooLarge,
         "window " + std::to_string(window) + " exceeds sequence length " + std::to_string(frames.size()));
  }
  const std::size_t count = (frames.size() - window) / stride + 1;
  std::vector<DynamicImage> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t origin = w * stride;
    auto sol = rank_svm_solve(RankPoolProblem::from_frames(frames.subspan(origin, window), delta), cfg);
    sol.image.window_origin = origin;
    out.push_back(std::move(sol.image));
  }
  return out;
}

Tensor normalize_dynamic_image(const Tensor& d) {
  Tensor out = d;
  const std::size_t channels = d.rank() >= 3 ? d.dim(0) : 1;
  const std::size_t per = d.size() / channels;
  for (std::size_t c = 0; c < channels; ++c) {
    float* v = out.ptr() + c * per;
    const auto [lo, hi] = std::minmax_element(v, v + per);
    const float mn = *lo;
    const float range = *hi - mn;
    for (std::size_t i = 0; i < per; ++i) {
      v[i] = range > 0.0f ? std::clamp((v[i] - mn) / range, 0.0f, 1.0f) : 0.5f;
    }
  }
  return out;
}

}  // namespace tcdc
