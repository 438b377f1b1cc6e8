#include "tcdc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tcdc {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradcheckReport gradcheck_network(const Network<double>& net, const BasicTensor<double>& batch,
                                  std::span<const std::size_t> labels, double eps, std::size_t per_tensor) {
  const auto analytic = net.loss_and_grads(batch, labels).grads;
  Network<double> probe = net;
  auto params = probe.parameters();
  const auto names = probe.parameter_names();
  GradcheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    BasicTensor<double>& w = *params[p];
    const std::size_t n = w.size();
    const std::size_t count = per_tensor == 0 ? n : std::min(n, per_tensor);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t i = count == n ? k : k * n / count;
      const double saved = w[i];
      w[i] = saved + eps;
      const double up = probe.loss_and_grads(batch, labels).loss;
      w[i] = saved - eps;
      const double down = probe.loss_and_grads(batch, labels).loss;
      w[i] = saved;
      const double err = relative_error(analytic[p][i], (up - down) / (2.0 * eps));
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst = names[p] + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

NetConfig tiny_net_config(double theta, std::size_t classes) {
  NetConfig cfg;
  cfg.theta = theta;
  cfg.num_classes = classes;
  cfg.in_channels = 2;
  cfg.clip_length = 4;
  cfg.input_size = 8;
  cfg.layers = {
      LayerSpec::make_conv(2, 3), LayerSpec::make_relu(), LayerSpec::make_pool({1, 2, 2}, {1, 2, 2}),
      LayerSpec::make_conv(3, 4), LayerSpec::make_relu(), LayerSpec::make_pool({2, 2, 2}, {2, 2, 2}),
      LayerSpec::make_flatten(),  LayerSpec::make_linear(32, classes),
  };
  return cfg;
}

GradcheckReport gradcheck_tiny(double theta, std::uint64_t seed, std::size_t batch) {
  const NetConfig cfg = tiny_net_config(theta);
  Network<double> net = Network<double>::build(cfg, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  // The fresh classifier is zero, which would hide every gradient below it.
  const auto params = net.parameters();
  for (auto* w : {params[params.size() - 2], params.back()})
    for (auto& v : w->data()) v = 0.5 * u(rng);
  Shape dims{batch};
  for (std::size_t d : cfg.input_shape()) dims.push_back(d);
  BasicTensor<double> x(dims);
  for (auto& v : x.data()) v = u(rng);
  std::vector<std::size_t> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = i % cfg.num_classes;
  return gradcheck_network(net, x, labels);
}

}  // namespace tcdc
