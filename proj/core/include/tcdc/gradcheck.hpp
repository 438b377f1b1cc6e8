#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "tcdc/net.hpp"

namespace tcdc {

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-6);

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // "<param>[<flat index>]"
  std::size_t checked = 0;
};

/// Central differences of the mean batch loss against the backward pass for
/// every parameter entry, or `per_tensor` evenly spaced entries per tensor.
GradcheckReport gradcheck_network(const Network<double>& net, const BasicTensor<double>& batch,
                                  std::span<const std::size_t> labels, double eps = 1e-6, std::size_t per_tensor = 0);

/// Two conv blocks on [2, 4, 8, 8] input, linear head with `classes` outputs.
NetConfig tiny_net_config(double theta, std::size_t classes = 2);

/// Builds the tiny net from seed, draws a random batch and runs the check.
GradcheckReport gradcheck_tiny(double theta, std::uint64_t seed, std::size_t batch = 2);

}  // namespace tcdc
