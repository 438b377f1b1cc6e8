#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tcdc/tensor.hpp"

namespace tcdc {

struct SolverConfig {
  std::size_t max_iters = 2000;
  double tol = 1e-6;          // relative decrease of the averaged iterate's objective ...
  std::size_t patience = 50;  // ... required over this many iterations
  double opt_gap = 1e-2;      // accepted distance to a grid-search optimum in checks
};

/// Prefix means I_1..I_k of a clip and the hinge weight delta.
struct RankPoolProblem {
  std::vector<Tensor> prefix_means;
  double delta = 1.0;

  static RankPoolProblem from_frames(std::span<const Tensor> frames, double delta);
  void validate() const;
  std::size_t pair_count() const noexcept { return prefix_means.size() * (prefix_means.size() - 1) / 2; }
};

struct DynamicImage {
  Tensor d;  // same dims as one frame
  std::size_t window_origin = 0;
};

struct RankPoolSolution {
  DynamicImage image;
  double objective = 0.0;  // F evaluated at the returned image
  std::size_t iterations = 0;
  std::vector<double> best_objective;  // best F seen up to each iteration
};

/// I_t = mean of frames 1..t.
std::vector<Tensor> prefix_means(std::span<const Tensor> frames);

/// F(w) = 1/2 |w|^2 + delta * sum_{i>j} max(0, 1 - w.(I_i - I_j)).
double rank_objective(const RankPoolProblem& problem, const Tensor& omega);

/// Sum of the optimal slacks max(0, 1 - w.(I_i - I_j)) at w.
double rank_slack_sum(const RankPoolProblem& problem, const Tensor& omega);

/// Full-batch subgradient descent on F with step 1/(iteration + pairs).
///
/// The iterate always lies in the span of the consecutive differences
/// I_{t+1} - I_t, so the descent runs on those coefficients with a Gram
/// matrix; the per-iteration cost is independent of the frame size.
RankPoolSolution rank_svm_solve(const RankPoolProblem& problem, const SolverConfig& cfg = {});

/// One dynamic image per window position; count = (len - window) / stride + 1.
std::vector<DynamicImage> dynamic_image_sequence(std::span<const Tensor> frames, std::size_t window,
                                                 std::size_t stride, double delta, const SolverConfig& cfg = {});

/// Per-channel min-max map to [0,1] (channel = axis 0 for rank >= 3);
/// constant channels map to 0.5.
Tensor normalize_dynamic_image(const Tensor& d);

}  // namespace tcdc
