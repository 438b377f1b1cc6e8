#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tcdc/conv3d.hpp"
#include "tcdc/datapipe.hpp"
#include "tcdc/layers.hpp"
#include "tcdc/tensor.hpp"

namespace tcdc {

enum class LayerKind { Conv, Pool, Relu, Flatten, Linear };

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  ConvSpec conv;                        // Conv; conv.theta is resolved from the net default
  std::optional<double> theta_override;  // Conv only
  PoolSpec pool;                        // Pool
  std::size_t in_features = 0;          // Linear
  std::size_t out_features = 0;         // Linear

  static LayerSpec make_conv(std::size_t in, std::size_t out, std::optional<double> theta = std::nullopt);
  static LayerSpec make_pool(Extent3 window, Extent3 stride);
  static LayerSpec make_relu();
  static LayerSpec make_flatten();
  static LayerSpec make_linear(std::size_t in, std::size_t out);

  bool has_params() const noexcept { return kind == LayerKind::Conv || kind == LayerKind::Linear; }
  bool operator==(const LayerSpec&) const = default;
};

struct NetConfig {
  std::vector<LayerSpec> layers;
  double theta = 0.7;
  std::size_t num_classes = 4;
  std::size_t in_channels = 5;
  std::size_t clip_length = 16;
  std::size_t input_size = kInputSize;

  /// Per-sample input [C, L, S, S].
  Shape input_shape() const { return {in_channels, clip_length, input_size, input_size}; }

  /// Theta a conv layer runs with: its override or the net default.
  double layer_theta(std::size_t layer) const;

  /// Per-sample shapes after every layer (front = input). Throws
  /// ShapeComposeError if the stack does not compose or does not end in
  /// num_classes outputs.
  std::vector<Shape> compose() const;

  std::string to_text() const;
  static NetConfig from_text(std::string_view text);

  bool operator==(const NetConfig&) const = default;
};

/// C3D-style desk backbone: four TCDC blocks (16, 32, 64, 64 filters, each
/// conv 3^3 -> relu -> max pool; the first pool is spatial only), then
/// linear 256 -> relu -> linear num_classes.
NetConfig desk_net_config(StreamKind stream, std::size_t clip_length, double theta = 0.7,
                          std::size_t num_classes = 4, std::size_t input_size = kInputSize);

template <typename T>
using LayerParams = std::variant<std::monostate, ConvParams<T>, LinearParams<T>>;

/// Layer stack with parameters. Forward/backward run sample by sample; there
/// is no batch-coupled layer, so a batch gradient is the mean of per-sample
/// gradients.
template <typename T>
class Network {
 public:
  Network() = default;
  /// Zero-initialised parameters.
  explicit Network(NetConfig cfg);

  /// He (fan-in) normal initialisation from seed; biases start at zero and so does a final linear classifier.
  static Network build(const NetConfig& cfg, std::uint64_t seed);

  const NetConfig& config() const noexcept { return cfg_; }

  std::vector<BasicTensor<T>*> parameters();
  std::vector<const BasicTensor<T>*> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

  /// Zero tensors shaped like parameters().
  std::vector<BasicTensor<T>> zero_grads() const;

  /// [N, C, L, H, W] -> logits [N, classes].
  BasicTensor<T> forward(const BasicTensor<T>& batch) const;

  /// Forward + backward for one sample [C, L, H, W] (or [1, C, L, H, W]).
  /// Adds grad_scale * d loss / d params into grads and returns the sample's
  /// cross-entropy loss; logits are written when requested.
  T accumulate_sample(const BasicTensor<T>& sample, std::size_t label, T grad_scale,
                      std::vector<BasicTensor<T>>& grads, BasicTensor<T>* logits = nullptr) const;

  struct LossAndGrads {
    T loss;  // mean over the batch
    std::vector<BasicTensor<T>> grads;
  };

  LossAndGrads loss_and_grads(const BasicTensor<T>& batch, std::span<const std::size_t> labels) const;

  template <typename U>
  Network<U> cast() const;

  const std::vector<LayerParams<T>>& layer_params() const noexcept { return params_; }
  std::vector<LayerParams<T>>& layer_params() noexcept { return params_; }

 private:
  BasicTensor<T> forward_sample(const BasicTensor<T>& sample, std::vector<BasicTensor<T>>* acts,
                                std::vector<std::vector<std::size_t>>* argmax) const;
  ConvSpec resolved_conv(std::size_t layer) const;

  NetConfig cfg_;
  std::vector<LayerParams<T>> params_;
};

}  // namespace tcdc
