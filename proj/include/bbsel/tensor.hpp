#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bbsel/sampling.hpp"

namespace bbsel {

/// (channels, height, width); flat vectors are (n, 1, 1).
struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense channel-major (CHW) storage in 8-byte floats.
struct Tensor {
  Shape shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), values(s.size(), fill) {}
  Tensor(Shape s, std::vector<double> v);

  double& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x];
  }
  double at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x];
  }
};

/// Single-channel tensor holding the image pixels.
Tensor to_tensor(const LandscapeImage& image);

// Layer primitives. Backward functions accumulate (+=) into parameter
// gradients and overwrite the input gradient.

/// 3x3 kernel, stride 1, zero padding 1. Weights are [out][in][3][3].
Tensor conv3x3(const Tensor& input, std::span<const double> weights, std::span<const double> bias, int out_channels);
void conv3x3_backward(const Tensor& input, std::span<const double> weights, const Tensor& grad_output,
                      Tensor* grad_input, std::span<double> grad_weights, std::span<double> grad_bias);

Tensor relu(const Tensor& input);
/// Subgradient at 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

struct PoolOutput {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};
/// 2x2 window, stride 2, floor mode. Ties go to the first element in
/// row-major window order.
PoolOutput maxpool2(const Tensor& input);
Tensor maxpool2_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax, const Tensor& grad_output);

/// Affine map on the flattened input. Weights are [out][in].
Tensor fully_connected(const Tensor& input, std::span<const double> weights, std::span<const double> bias, int out_features);
void fully_connected_backward(const Tensor& input, std::span<const double> weights, const Tensor& grad_output,
                              Tensor* grad_input, std::span<double> grad_weights, std::span<double> grad_bias);

std::vector<double> softmax(std::span<const double> logits);

struct SoftmaxLoss {
  double loss;                        // -log p[target]
  std::vector<double> probabilities;
  std::vector<double> grad_logits;    // p - onehot(target)
};
SoftmaxLoss softmax_cross_entropy(std::span<const double> logits, int target);

}  // namespace bbsel
