#include "tcdc/net.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

namespace tcdc {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(ErrorCode::ConfigError, "bad number '" + s + "'");
  return v;
}

std::size_t parse_size(const std::string& s) {
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(ErrorCode::ConfigError, "bad integer '" + s + "'");
  return v;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

}  // namespace

LayerSpec LayerSpec::make_conv(std::size_t in, std::size_t out, std::optional<double> theta) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.conv.in_channels = in;
  l.conv.out_channels = out;
  l.theta_override = theta;
  return l;
}

LayerSpec LayerSpec::make_pool(Extent3 window, Extent3 stride) {
  LayerSpec l;
  l.kind = LayerKind::Pool;
  l.pool = {window, stride};
  return l;
}

LayerSpec LayerSpec::make_relu() { return LayerSpec{}; }

LayerSpec LayerSpec::make_flatten() {
  LayerSpec l;
  l.kind = LayerKind::Flatten;
  return l;
}

LayerSpec LayerSpec::make_linear(std::size_t in, std::size_t out) {
  LayerSpec l;
  l.kind = LayerKind::Linear;
  l.in_features = in;
  l.out_features = out;
  return l;
}

double NetConfig::layer_theta(std::size_t layer) const {
  const auto& l = layers.at(layer);
  return l.theta_override.value_or(theta);
}

std::vector<Shape> NetConfig::compose() const {
  auto bad = [](std::size_t i, const std::string& why) {
    fail(ErrorCode::ShapeComposeError, "layer " + std::to_string(i) + ": " + why);
  };
  std::vector<Shape> shapes{input_shape()};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const Shape& in = shapes.back();
    Shape out;
    switch (l.kind) {
      case LayerKind::Conv: {
        if (in.size() != 4) bad(i, "conv expects [C,T,H,W], got " + shape_str(in));
        if (in[0] != l.conv.in_channels) bad(i, "conv expects " + std::to_string(l.conv.in_channels) + " channels, got " + shape_str(in));
        ConvSpec spec = l.conv;
        spec.theta = layer_theta(i);
        try {
          const Extent3 e = spec.output_extent({in[1], in[2], in[3]});
          spec.validate();
          out = {spec.out_channels, e.t, e.h, e.w};
        } catch (const Error& e) {
          if (e.code() == ErrorCode::ThetaOutOfRange) throw;
          bad(i, e.what());
        }
        break;
      }
      case LayerKind::Pool: {
        if (in.size() != 4) bad(i, "pool expects [C,T,H,W], got " + shape_str(in));
        try {
          const Extent3 e = l.pool.output_extent({in[1], in[2], in[3]});
          out = {in[0], e.t, e.h, e.w};
        } catch (const Error& e) {
          bad(i, e.what());
        }
        break;
      }
      case LayerKind::Relu:
        out = in;
        break;
      case LayerKind::Flatten:
        out = {shape_size(in)};
        break;
      case LayerKind::Linear:
        if (in.size() != 1) bad(i, "linear needs a flattened input, got " + shape_str(in));
        if (in[0] != l.in_features) {
          bad(i, "linear expects " + std::to_string(l.in_features) + " inputs, got " + std::to_string(in[0]));
        }
        if (l.out_features == 0) bad(i, "linear with zero outputs");
        out = {l.out_features};
        break;
    }
    shapes.push_back(std::move(out));
  }
  if (shapes.back() != Shape{num_classes}) {
    fail(ErrorCode::ShapeComposeError, "network ends in " + shape_str(shapes.back()) + ", expected [" +
                                           std::to_string(num_classes) + "]");
  }
  return shapes;
}

std::string NetConfig::to_text() const {
  std::ostringstream os;
  os << "input " << in_channels << ' ' << clip_length << ' ' << input_size << '\n';
  os << "classes " << num_classes << '\n';
  os << "theta " << fmt_double(theta) << '\n';
  for (const auto& l : layers) {
    os << "layer ";
    switch (l.kind) {
      case LayerKind::Conv: {
        const auto& c = l.conv;
        os << "conv " << c.in_channels << ' ' << c.out_channels << ' ' << c.kernel.t << ' ' << c.kernel.h << ' '
           << c.kernel.w << ' ' << c.stride.t << ' ' << c.stride.h << ' ' << c.stride.w << ' ' << c.padding.t << ' '
           << c.padding.h << ' ' << c.padding.w;
        if (l.theta_override) os << " theta=" << fmt_double(*l.theta_override);
        break;
      }
      case LayerKind::Pool:
        os << "pool " << l.pool.window.t << ' ' << l.pool.window.h << ' ' << l.pool.window.w << ' ' << l.pool.stride.t
           << ' ' << l.pool.stride.h << ' ' << l.pool.stride.w;
        break;
      case LayerKind::Relu: os << "relu"; break;
      case LayerKind::Flatten: os << "flatten"; break;
      case LayerKind::Linear: os << "linear " << l.in_features << ' ' << l.out_features; break;
    }
    os << '\n';
  }
  return os.str();
}

NetConfig NetConfig::from_text(std::string_view text) {
  NetConfig cfg;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    auto need = [&](std::size_t n) {
      if (tok.size() != n) fail(ErrorCode::ConfigError, "malformed net line '" + line + "'");
    };
    if (tok[0] == "input") {
      need(4);
      cfg.in_channels = parse_size(tok[1]);
      cfg.clip_length = parse_size(tok[2]);
      cfg.input_size = parse_size(tok[3]);
    } else if (tok[0] == "classes") {
      need(2);
      cfg.num_classes = parse_size(tok[1]);
    } else if (tok[0] == "theta") {
      need(2);
      cfg.theta = parse_double(tok[1]);
    } else if (tok[0] == "layer" && tok.size() >= 2) {
      const std::string& kind = tok[1];
      if (kind == "conv") {
        if (tok.size() != 13 && tok.size() != 14) fail(ErrorCode::ConfigError, "malformed conv line '" + line + "'");
        LayerSpec l = LayerSpec::make_conv(parse_size(tok[2]), parse_size(tok[3]));
        l.conv.kernel = {parse_size(tok[4]), parse_size(tok[5]), parse_size(tok[6])};
        l.conv.stride = {parse_size(tok[7]), parse_size(tok[8]), parse_size(tok[9])};
        l.conv.padding = {parse_size(tok[10]), parse_size(tok[11]), parse_size(tok[12])};
        if (tok.size() == 14) {
          if (tok[13].rfind("theta=", 0) != 0) fail(ErrorCode::ConfigError, "malformed conv line '" + line + "'");
          l.theta_override = parse_double(tok[13].substr(6));
        }
        cfg.layers.push_back(l);
      } else if (kind == "pool") {
        need(8);
        cfg.layers.push_back(LayerSpec::make_pool({parse_size(tok[2]), parse_size(tok[3]), parse_size(tok[4])},
                                                  {parse_size(tok[5]), parse_size(tok[6]), parse_size(tok[7])}));
      } else if (kind == "relu") {
        cfg.layers.push_back(LayerSpec::make_relu());
      } else if (kind == "flatten") {
        cfg.layers.push_back(LayerSpec::make_flatten());
      } else if (kind == "linear") {
        need(4);
        cfg.layers.push_back(LayerSpec::make_linear(parse_size(tok[2]), parse_size(tok[3])));
      } else {
        fail(ErrorCode::ConfigError, "unknown layer kind '" + kind + "'");
      }
    } else {
      fail(ErrorCode::ConfigError, "unknown net line '" + line + "'");
    }
  }
  return cfg;
}

NetConfig desk_net_config(StreamKind stream, std::size_t clip_length, double theta, std::size_t num_classes,
                          std::size_t input_size) {
  NetConfig cfg;
  cfg.theta = theta;
  cfg.num_classes = num_classes;
  cfg.in_channels = stream_channels(stream);
  cfg.clip_length = clip_length;
  cfg.input_size = input_size;
  const std::size_t widths[] = {16, 32, 64, 64};
  std::size_t in = cfg.in_channels;
  for (std::size_t b = 0; b < 4; ++b) {
    cfg.layers.push_back(LayerSpec::make_conv(in, widths[b]));
    cfg.layers.push_back(LayerSpec::make_relu());
    cfg.layers.push_back(b == 0 ? LayerSpec::make_pool({1, 2, 2}, {1, 2, 2}) : LayerSpec::make_pool({2, 2, 2}, {2, 2, 2}));
    in = widths[b];
  }
  cfg.layers.push_back(LayerSpec::make_flatten());

  // Width of the flattened feature extractor output.
  Shape s = cfg.input_shape();
  for (const auto& l : cfg.layers) {
    if (l.kind == LayerKind::Conv) {
      const Extent3 e = l.conv.output_extent({s[1], s[2], s[3]});
      s = {l.conv.out_channels, e.t, e.h, e.w};
    } else if (l.kind == LayerKind::Pool) {
      const Extent3 e = l.pool.output_extent({s[1], s[2], s[3]});
      s = {s[0], e.t, e.h, e.w};
    } else if (l.kind == LayerKind::Flatten) {
      s = {shape_size(s)};
    }
  }
  cfg.layers.push_back(LayerSpec::make_linear(s.at(0), 256));
  cfg.layers.push_back(LayerSpec::make_relu());
  cfg.layers.push_back(LayerSpec::make_linear(256, num_classes));
  cfg.compose();
  return cfg;
}

template <typename T>
Network<T>::Network(NetConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.compose();
  params_.resize(cfg_.layers.size());
  for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
    const auto& l = cfg_.layers[i];
    if (l.kind == LayerKind::Conv) {
      params_[i] = conv_params_zero<T>(resolved_conv(i));
    } else if (l.kind == LayerKind::Linear) {
      params_[i] = LinearParams<T>{BasicTensor<T>({l.out_features, l.in_features}), BasicTensor<T>({l.out_features})};
    }
  }
}

template <typename T>
Network<T> Network<T>::build(const NetConfig& cfg, std::uint64_t seed) {
  Network net(cfg);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < net.cfg_.layers.size(); ++i) {
    BasicTensor<T>* w = nullptr;
    std::size_t fan_in = 0;
    if (auto* c = std::get_if<ConvParams<T>>(&net.params_[i])) {
      w = &c->weights;
      fan_in = w->size() / w->dim(0);
    } else if (auto* l = std::get_if<LinearParams<T>>(&net.params_[i])) {
      w = &l->weights;
      fan_in = w->dim(1);
    }
    if (!w) continue;
    // A zero classifier starts every class at equal probability.
    if (i + 1 == net.cfg_.layers.size() && std::holds_alternative<LinearParams<T>>(net.params_[i])) continue;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& v : w->data()) v = static_cast<T>(dist(rng));
  }
  return net;
}

template <typename T>
ConvSpec Network<T>::resolved_conv(std::size_t layer) const {
  ConvSpec s = cfg_.layers[layer].conv;
  s.theta = cfg_.layer_theta(layer);
  return s;
}

template <typename T>
std::vector<BasicTensor<T>*> Network<T>::parameters() {
  std::vector<BasicTensor<T>*> out;
  for (auto& p : params_) {
    if (auto* c = std::get_if<ConvParams<T>>(&p)) {
      out.push_back(&c->weights);
      out.push_back(&c->bias);
    } else if (auto* l = std::get_if<LinearParams<T>>(&p)) {
      out.push_back(&l->weights);
      out.push_back(&l->bias);
    }
  }
  return out;
}

template <typename T>
std::vector<const BasicTensor<T>*> Network<T>::parameters() const {
  std::vector<const BasicTensor<T>*> out;
  for (auto* p : const_cast<Network*>(this)->parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<std::string> Network<T>::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
    if (!cfg_.layers[i].has_params()) continue;
    const std::string base = (cfg_.layers[i].kind == LayerKind::Conv ? "conv" : "linear") + std::to_string(i);
    out.push_back(base + "_weight");
    out.push_back(base + "_bias");
  }
  return out;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

template <typename T>
std::vector<BasicTensor<T>> Network<T>::zero_grads() const {
  std::vector<BasicTensor<T>> out;
  for (const auto* p : parameters()) out.emplace_back(p->dims());
  return out;
}

template <typename T>
BasicTensor<T> Network<T>::forward_sample(const BasicTensor<T>& sample, std::vector<BasicTensor<T>>* acts,
                                          std::vector<std::vector<std::size_t>>* argmax) const {
  const Shape expected = cfg_.input_shape();
  BasicTensor<T> x = sample;
  if (x.rank() == 4) x.reshape({1, x.dim(0), x.dim(1), x.dim(2), x.dim(3)});
  if (x.rank() != 5 || x.dim(0) != 1 || Shape(x.dims().begin() + 1, x.dims().end()) != expected) {
    fail(ErrorCode::ShapeMismatch, "sample " + shape_str(sample.dims()) + " does not match net input " + shape_str(expected));
  }
  if (acts) {
    acts->clear();
    acts->reserve(cfg_.layers.size() + 1);
  }
  if (argmax) argmax->assign(cfg_.layers.size(), {});
  for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
    const auto& l = cfg_.layers[i];
    BasicTensor<T> y;
    switch (l.kind) {
      case LayerKind::Conv:
        y = tcdc_forward(x, std::get<ConvParams<T>>(params_[i]), resolved_conv(i));
        break;
      case LayerKind::Pool: {
        auto r = maxpool3d(x, l.pool);
        y = std::move(r.output);
        if (argmax) (*argmax)[i] = std::move(r.argmax);
        break;
      }
      case LayerKind::Relu:
        y = relu(x);
        break;
      case LayerKind::Flatten:
        y = x;
        y.reshape({1, x.size()});
        break;
      case LayerKind::Linear:
        y = linear(x, std::get<LinearParams<T>>(params_[i]));
        break;
    }
    if (acts) acts->push_back(std::move(x));
    x = std::move(y);
  }
  return x;
}

template <typename T>
BasicTensor<T> Network<T>::forward(const BasicTensor<T>& batch) const {
  if (batch.rank() != 5) fail(ErrorCode::ShapeMismatch, "forward expects [N,C,L,H,W]");
  const std::size_t n = batch.dim(0);
  const std::size_t per = batch.size() / n;
  BasicTensor<T> logits({n, cfg_.num_classes});
  for (std::size_t s = 0; s < n; ++s) {
    BasicTensor<T> one({1, batch.dim(1), batch.dim(2), batch.dim(3), batch.dim(4)},
                       std::vector<T>(batch.ptr() + s * per, batch.ptr() + (s + 1) * per));
    const auto y = forward_sample(one, nullptr, nullptr);
    std::copy(y.ptr(), y.ptr() + cfg_.num_classes, logits.ptr() + s * cfg_.num_classes);
  }
  return logits;
}

template <typename T>
T Network<T>::accumulate_sample(const BasicTensor<T>& sample, std::size_t label, T grad_scale,
                                std::vector<BasicTensor<T>>& grads, BasicTensor<T>* logits) const {
  std::vector<BasicTensor<T>> acts;
  std::vector<std::vector<std::size_t>> argmax;
  const BasicTensor<T> out = forward_sample(sample, &acts, &argmax);
  if (logits) *logits = out;
  const std::size_t labels[] = {label};
  auto xent = softmax_xent(out, labels);
  BasicTensor<T> g = scale(xent.grad, grad_scale);

  if (grads.size() != parameters().size()) fail(ErrorCode::ShapeMismatch, "gradient buffer count mismatch");
  std::size_t slot = grads.size();
  for (std::size_t i = cfg_.layers.size(); i-- > 0;) {
    const auto& l = cfg_.layers[i];
    const BasicTensor<T>& x = acts[i];
    switch (l.kind) {
      case LayerKind::Conv: {
        auto cg = tcdc_backward(x, std::get<ConvParams<T>>(params_[i]), resolved_conv(i), g, i > 0);
        slot -= 2;
        grads[slot] = add(grads[slot], cg.weights);
        grads[slot + 1] = add(grads[slot + 1], cg.bias);
        g = std::move(cg.input);
        break;
      }
      case LayerKind::Pool:
        g = maxpool3d_backward(g, argmax[i], x.dims());
        break;
      case LayerKind::Relu:
        g = relu_backward(x, g);
        break;
      case LayerKind::Flatten:
        g.reshape(x.dims());
        break;
      case LayerKind::Linear: {
        auto lg = linear_backward(x, std::get<LinearParams<T>>(params_[i]), g);
        slot -= 2;
        grads[slot] = add(grads[slot], lg.weights);
        grads[slot + 1] = add(grads[slot + 1], lg.bias);
        g = std::move(lg.input);
        break;
      }
    }
    if (i == 0) break;
  }
  return xent.loss;
}

template <typename T>
typename Network<T>::LossAndGrads Network<T>::loss_and_grads(const BasicTensor<T>& batch,
                                                              std::span<const std::size_t> labels) const {
  if (batch.rank() != 5) fail(ErrorCode::ShapeMismatch, "loss_and_grads expects [N,C,L,H,W]");
  const std::size_t n = batch.dim(0);
  if (labels.size() != n) fail(ErrorCode::ShapeMismatch, "label count differs from batch size");
  const std::size_t per = batch.size() / n;
  LossAndGrads r{T{0}, zero_grads()};
  const T inv = T{1} / static_cast<T>(n);
  for (std::size_t s = 0; s < n; ++s) {
    BasicTensor<T> one({1, batch.dim(1), batch.dim(2), batch.dim(3), batch.dim(4)},
                       std::vector<T>(batch.ptr() + s * per, batch.ptr() + (s + 1) * per));
    r.loss += accumulate_sample(one, labels[s], inv, r.grads) * inv;
  }
  return r;
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  Network<U> out(cfg_);
  auto dst = out.parameters();
  auto src = parameters();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = tensor_cast<U>(*src[i]);
  return out;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> Network<float>::cast<float>() const;
template Network<double> Network<double>::cast<double>() const;

}  // namespace tcdc
