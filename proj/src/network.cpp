#include "bbsel/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bbsel/common.hpp"
#include "bbsel/rng.hpp"

namespace bbsel {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::A: return "a";
    case Variant::B: return "b";
    case Variant::Custom: return "custom";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  if (text == "a" || text == "A") return Variant::A;
  if (text == "b" || text == "B") return Variant::B;
  if (text == "custom") return Variant::Custom;
  fail(ErrorKind::InvalidArgument, "unknown architecture variant '" + text + "' (expected a or b)");
}

int WidthScale::apply(int width) const {
  return std::max(1, static_cast<int>(static_cast<long long>(width) * num / den));
}

WidthScale WidthScale::parse(const std::string& text) {
  WidthScale s;
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      s.num = std::stoi(text.substr(0, slash));
      s.den = std::stoi(text.substr(slash + 1));
    } else {
      const double v = std::stod(text);
      int den = 1;
      while (den < 4096 && std::abs(v * den - std::round(v * den)) > 1e-9) den *= 2;
      s.num = static_cast<int>(std::round(v * den));
      s.den = den;
    }
  } catch (const std::exception&) {
    fail(ErrorKind::InvalidArgument, "malformed width scale '" + text + "'");
  }
  if (s.num <= 0 || s.den <= 0 || s.num > s.den)
    fail(ErrorKind::InvalidArgument, "width scale must lie in (0, 1], got '" + text + "'");
  const int g = std::gcd(s.num, s.den);
  s.num /= g;
  s.den /= g;
  return s;
}

std::string WidthScale::str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }

std::vector<ConvGroup> conv_groups(Variant v) {
  std::vector<ConvGroup> groups = {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}};
  if (v == Variant::B) groups.pop_back();
  if (v == Variant::Custom) fail(ErrorKind::Config, "custom networks have no conv group plan");
  return groups;
}

ArchitectureConfig ArchitectureConfig::variant_a(int num_classes, WidthScale scale, std::uint64_t seed) {
  return {Variant::A, 100, num_classes, scale, seed};
}

ArchitectureConfig ArchitectureConfig::variant_b(int num_classes, WidthScale scale, std::uint64_t seed) {
  return {Variant::B, 45, num_classes, scale, seed};
}

std::vector<LayerSpec> layer_plan(const ArchitectureConfig& config) {
  if (config.num_classes < 2) fail(ErrorKind::Config, "need at least two classes");
  std::vector<LayerSpec> specs;
  for (const ConvGroup& g : conv_groups(config.variant)) {
    for (int i = 0; i < g.layers; ++i) {
      specs.push_back({LayerKind::Conv3x3, config.width_scale.apply(g.channels)});
      specs.push_back({LayerKind::Relu});
    }
    specs.push_back({LayerKind::MaxPool2});
  }
  specs.push_back({LayerKind::FullyConnected, config.width_scale.apply(kFcWidths[0])});
  specs.push_back({LayerKind::Relu});
  specs.push_back({LayerKind::FullyConnected, config.width_scale.apply(kFcWidths[1])});
  specs.push_back({LayerKind::Relu});
  specs.push_back({LayerKind::FullyConnected, config.width_scale.apply(kFcWidths[2])});
  specs.push_back({LayerKind::FullyConnected, config.num_classes});
  return specs;
}

Network::Network(ArchitectureConfig config, Shape input, std::vector<LayerSpec> specs)
    : config_(config), input_(input) {
  if (input.size() == 0) fail(ErrorKind::Config, "empty input shape");
  Shape cur = input;
  std::size_t offset = 0;
  for (const LayerSpec& spec : specs) {
    Layer layer{spec, cur, cur};
    switch (spec.kind) {
      case LayerKind::Conv3x3:
        if (spec.units < 1) fail(ErrorKind::Config, "conv layer needs positive channel count");
        layer.output = {spec.units, cur.height, cur.width};
        layer.weight_count = static_cast<std::size_t>(spec.units) * cur.channels * 9;
        layer.bias_count = static_cast<std::size_t>(spec.units);
        break;
      case LayerKind::Relu: break;
      case LayerKind::MaxPool2:
        if (cur.height < 2 || cur.width < 2)
          fail(ErrorKind::Config, "spatial size collapses to 0 at pooling layer (input " + to_string(cur) + ")");
        layer.output = {cur.channels, cur.height / 2, cur.width / 2};
        break;
      case LayerKind::FullyConnected:
        if (spec.units < 1) fail(ErrorKind::Config, "fc layer needs positive width");
        layer.output = {spec.units, 1, 1};
        layer.weight_count = static_cast<std::size_t>(spec.units) * cur.size();
        layer.bias_count = static_cast<std::size_t>(spec.units);
        break;
      default: fail(ErrorKind::Format, "unknown layer kind");
    }
    layer.weight_offset = offset;
    offset += layer.weight_count;
    layer.bias_offset = offset;
    offset += layer.bias_count;
    layers_.push_back(layer);
    cur = layer.output;
  }
  if (layers_.empty()) fail(ErrorKind::Config, "network has no layers");
  params_.assign(offset, 0.0);
  labels_.resize(output_shape().size());
  std::iota(labels_.begin(), labels_.end(), 0);
  config_.num_classes = num_classes();
}

void Network::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& layer = layers_[li];
    if (layer.weight_count == 0) continue;
    const bool followed_by_relu = li + 1 < layers_.size() && layers_[li + 1].spec.kind == LayerKind::Relu;
    const double fan_in = static_cast<double>(layer.weight_count / layer.bias_count);
    const double sd = std::sqrt((followed_by_relu ? 2.0 : 1.0) / fan_in);
    for (std::size_t k = 0; k < layer.weight_count; ++k) params_[layer.weight_offset + k] = rng.normal(0.0, sd);
  }
}

Network Network::build(const ArchitectureConfig& config) {
  if (config.input_side < 1) fail(ErrorKind::Config, "input side must be positive");
  Network net(config, Shape{1, config.input_side, config.input_side}, layer_plan(config));
  net.initialize(config.seed);
  return net;
}

Network Network::from_layers(Shape input, std::vector<LayerSpec> specs, std::uint64_t seed) {
  ArchitectureConfig config{Variant::Custom, input.height, 0, {}, seed};
  Network net(config, input, std::move(specs));
  net.initialize(seed);
  return net;
}

Network Network::empty(const ArchitectureConfig& config, Shape input, std::vector<LayerSpec> specs) {
  return Network(config, input, std::move(specs));
}

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> s;
  for (const Layer& l : layers_) s.push_back(l.spec);
  return s;
}

std::vector<Shape> Network::shape_chain() const {
  std::vector<Shape> chain{input_};
  for (const Layer& l : layers_) chain.push_back(l.output);
  return chain;
}

void Network::set_labels(std::vector<int> labels) {
  require(labels.size() == static_cast<std::size_t>(num_classes()), "label map size must equal the number of outputs");
  labels_ = std::move(labels);
}

int Network::index_of_label(int label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) fail(ErrorKind::InvalidArgument, "label " + std::to_string(label) + " is not an output of this network");
  return static_cast<int>(it - labels_.begin());
}

namespace {
std::span<const double> weights_of(const Network& net, const Layer& l) {
  return net.parameters().subspan(l.weight_offset, l.weight_count);
}
std::span<const double> bias_of(const Network& net, const Layer& l) {
  return net.parameters().subspan(l.bias_offset, l.bias_count);
}
}  // namespace

std::vector<double> forward_logits(const Network& net, const Tensor& input, ForwardCache* cache) {
  if (!(input.shape == net.input_shape()))
    fail(ErrorKind::InvalidArgument,
         "input shape " + to_string(input.shape) + " does not match network input " + to_string(net.input_shape()));
  if (cache) {
    cache->activations.assign(1, input);
    cache->argmax.assign(net.layers().size(), {});
  }
  Tensor cur = input;
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    const Layer& l = net.layers()[li];
    Tensor next;
    switch (l.spec.kind) {
      case LayerKind::Conv3x3: next = conv3x3(cur, weights_of(net, l), bias_of(net, l), l.spec.units); break;
      case LayerKind::Relu: next = relu(cur); break;
      case LayerKind::MaxPool2: {
        PoolOutput p = maxpool2(cur);
        next = std::move(p.output);
        if (cache) cache->argmax[li] = std::move(p.argmax);
        break;
      }
      case LayerKind::FullyConnected:
        next = fully_connected(cur, weights_of(net, l), bias_of(net, l), l.spec.units);
        break;
    }
    if (cache) cache->activations.push_back(next);
    cur = std::move(next);
  }
  return std::move(cur.values);
}

std::vector<double> forward(const Network& net, const Tensor& input) { return softmax(forward_logits(net, input)); }

std::vector<double> forward(const Network& net, const LandscapeImage& image) {
  if (image.side != net.input_shape().height || net.input_shape().channels != 1)
    fail(ErrorKind::InvalidArgument, "image side " + std::to_string(image.side) + " does not match network input side " +
                                         std::to_string(net.input_shape().height));
  return forward(net, to_tensor(image));
}

int predict_index(const Network& net, const LandscapeImage& image) {
  const std::vector<double> p = forward(net, image);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

int predict_label(const Network& net, const LandscapeImage& image) {
  return net.labels()[static_cast<std::size_t>(predict_index(net, image))];
}

double loss_and_gradient(const Network& net, const Tensor& input, int target, std::span<double> grad, Tensor* grad_input) {
  require(grad.size() == net.parameter_count(), "gradient buffer has wrong size");
  ForwardCache cache;
  const std::vector<double> logits = forward_logits(net, input, &cache);
  const SoftmaxLoss sl = softmax_cross_entropy(logits, target);

  Tensor g(net.output_shape(), sl.grad_logits);
  for (std::size_t li = net.layers().size(); li-- > 0;) {
    const Layer& l = net.layers()[li];
    const Tensor& in = cache.activations[li];
    const bool need_input_grad = li > 0 || grad_input != nullptr;
    Tensor gin;
    switch (l.spec.kind) {
      case LayerKind::Conv3x3:
        conv3x3_backward(in, weights_of(net, l), g, need_input_grad ? &gin : nullptr,
                         grad.subspan(l.weight_offset, l.weight_count), grad.subspan(l.bias_offset, l.bias_count));
        break;
      case LayerKind::Relu: gin = relu_backward(in, g); break;
      case LayerKind::MaxPool2: gin = maxpool2_backward(in.shape, cache.argmax[li], g); break;
      case LayerKind::FullyConnected:
        fully_connected_backward(in, weights_of(net, l), g, need_input_grad ? &gin : nullptr,
                                 grad.subspan(l.weight_offset, l.weight_count), grad.subspan(l.bias_offset, l.bias_count));
        break;
    }
    if (!need_input_grad) break;
    g = std::move(gin);
  }
  if (grad_input) *grad_input = std::move(g);
  return sl.loss;
}

}  // namespace bbsel
