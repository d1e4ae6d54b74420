#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bbsel/tensor.hpp"

namespace bbsel {

enum class LayerKind : std::uint8_t { Conv3x3 = 1, Relu = 2, MaxPool2 = 3, FullyConnected = 4 };

struct LayerSpec {
  LayerKind kind;
  int units = 0;  // output channels (conv) or output features (fc)

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Layer {
  LayerSpec spec;
  Shape input;
  Shape output;
  std::size_t weight_offset = 0;
  std::size_t weight_count = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_count = 0;
};

enum class Variant : std::uint8_t {
  A = 0,       // five conv groups, for 100 x 100 inputs
  B = 1,       // first four groups, for 45 x 45 inputs
  Custom = 2,  // arbitrary layer stack (tests, tooling)
};

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);

/// Rational shrink factor applied to every channel and fc width.
struct WidthScale {
  int num = 1;
  int den = 1;

  int apply(int width) const;
  static WidthScale parse(const std::string& text);  // "1/8", "0.125", "1"
  std::string str() const;
  friend bool operator==(const WidthScale&, const WidthScale&) = default;
};

struct ConvGroup {
  int layers;
  int channels;
};

/// Conv group plan, unscaled: 2x64, 2x128, 3x256, 3x512, 3x512 (A drops the last for B).
std::vector<ConvGroup> conv_groups(Variant v);
inline constexpr int kFcWidths[] = {4096, 1000, 200};

struct ArchitectureConfig {
  Variant variant = Variant::A;
  int input_side = 100;
  int num_classes = 2;
  WidthScale width_scale;
  std::uint64_t seed = 0;

  static ArchitectureConfig variant_a(int num_classes, WidthScale scale = {}, std::uint64_t seed = 0);
  static ArchitectureConfig variant_b(int num_classes, WidthScale scale = {}, std::uint64_t seed = 0);
};

/// conv3 + ReLU per conv layer, max-pool after each group, then
/// fc4096 + ReLU, fc1000 + ReLU, fc200, then fc(num_classes) feeding the softmax.
std::vector<LayerSpec> layer_plan(const ArchitectureConfig& config);

class Network {
 public:
  /// He-normal weights for layers followed by ReLU, LeCun-normal for the
  /// output layer, zero biases.
  static Network build(const ArchitectureConfig& config);
  static Network from_layers(Shape input, std::vector<LayerSpec> specs, std::uint64_t seed);
  /// Layout only, zero parameters.
  static Network empty(const ArchitectureConfig& config, Shape input, std::vector<LayerSpec> specs);

  const ArchitectureConfig& config() const { return config_; }
  const Shape& input_shape() const { return input_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<LayerSpec> specs() const;
  std::vector<Shape> shape_chain() const;
  int num_classes() const { return static_cast<int>(output_shape().size()); }
  Shape output_shape() const { return layers_.empty() ? input_ : layers_.back().output; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  /// Output index -> label value (default 0..K-1).
  const std::vector<int>& labels() const { return labels_; }
  void set_labels(std::vector<int> labels);
  int index_of_label(int label) const;

 private:
  Network(ArchitectureConfig config, Shape input, std::vector<LayerSpec> specs);
  void initialize(std::uint64_t seed);

  ArchitectureConfig config_;
  Shape input_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
  std::vector<int> labels_;
};

inline Network build_network(const ArchitectureConfig& config) { return Network::build(config); }

/// Per-sample intermediate values kept for backpropagation.
struct ForwardCache {
  std::vector<Tensor> activations;                 // [0] is the input, [i+1] the output of layer i
  std::vector<std::vector<std::uint32_t>> argmax;  // per pool layer index
};

std::vector<double> forward_logits(const Network& net, const Tensor& input, ForwardCache* cache = nullptr);

/// Class probabilities.
std::vector<double> forward(const Network& net, const Tensor& input);
std::vector<double> forward(const Network& net, const LandscapeImage& image);

/// Argmax output index; ties resolve to the lowest index.
int predict_index(const Network& net, const LandscapeImage& image);
int predict_label(const Network& net, const LandscapeImage& image);

/// Cross-entropy loss for one sample; parameter gradients are accumulated
/// into grad (length parameter_count()). If grad_input is non-null it
/// receives the gradient with respect to the input.
double loss_and_gradient(const Network& net, const Tensor& input, int target, std::span<double> grad,
                         Tensor* grad_input = nullptr);

}  // namespace bbsel
