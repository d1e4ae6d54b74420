#include "bbsel/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bbsel/common.hpp"

namespace bbsel {

std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(s), values(std::move(v)) {
  require(values.size() == shape.size(), "tensor value count does not match shape " + to_string(shape));
}

Tensor to_tensor(const LandscapeImage& image) {
  Tensor t(Shape{1, image.side, image.side});
  std::copy(image.pixels.begin(), image.pixels.end(), t.values.begin());
  return t;
}

namespace {
void check_count(std::span<const double> s, std::size_t n, const char* what) {
  if (s.size() != n)
    fail(ErrorKind::InvalidArgument,
         std::string(what) + ": expected " + std::to_string(n) + " values, got " + std::to_string(s.size()));
}

// Valid output range [lo, hi) for a kernel offset d in {-1, 0, 1}.
inline int range_lo(int d) { return d < 0 ? 1 : 0; }
inline int range_hi(int n, int d) { return d > 0 ? n - 1 : n; }
}  // namespace

Tensor conv3x3(const Tensor& input, std::span<const double> weights, std::span<const double> bias, int out_channels) {
  const Shape in = input.shape;
  require(out_channels >= 1, "conv3x3: out_channels must be positive");
  check_count(weights, static_cast<std::size_t>(out_channels) * in.channels * 9, "conv3x3 weights (channel mismatch?)");
  check_count(bias, static_cast<std::size_t>(out_channels), "conv3x3 bias");
  const int h = in.height;
  const int w = in.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out(Shape{out_channels, h, w});
  for (int o = 0; o < out_channels; ++o) {
    double* dst_plane = out.values.data() + o * plane;
    std::fill(dst_plane, dst_plane + plane, bias[static_cast<std::size_t>(o)]);
    for (int i = 0; i < in.channels; ++i) {
      const double* src_plane = input.values.data() + i * plane;
      const double* k = weights.data() + (static_cast<std::size_t>(o) * in.channels + i) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const double wv = k[ky * 3 + kx];
          const int x0 = range_lo(dx);
          const int x1 = range_hi(w, dx);
          for (int y = range_lo(dy); y < range_hi(h, dy); ++y) {
            const double* src = src_plane + static_cast<std::size_t>(y + dy) * w + dx;
            double* dst = dst_plane + static_cast<std::size_t>(y) * w;
            for (int x = x0; x < x1; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  }
  return out;
}

void conv3x3_backward(const Tensor& input, std::span<const double> weights, const Tensor& grad_output,
                      Tensor* grad_input, std::span<double> grad_weights, std::span<double> grad_bias) {
  const Shape in = input.shape;
  const int out_channels = grad_output.shape.channels;
  require(grad_output.shape.height == in.height && grad_output.shape.width == in.width, "conv3x3_backward: shape mismatch");
  check_count(weights, static_cast<std::size_t>(out_channels) * in.channels * 9, "conv3x3 weights");
  require(grad_weights.size() == weights.size(), "conv3x3_backward: weight gradient size");
  require(grad_bias.size() == static_cast<std::size_t>(out_channels), "conv3x3_backward: bias gradient size");
  const int h = in.height;
  const int w = in.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  if (grad_input) *grad_input = Tensor(in);

  for (int o = 0; o < out_channels; ++o) {
    const double* g_plane = grad_output.values.data() + o * plane;
    double gb = 0.0;
    for (std::size_t p = 0; p < plane; ++p) gb += g_plane[p];
    grad_bias[static_cast<std::size_t>(o)] += gb;
    for (int i = 0; i < in.channels; ++i) {
      const double* src_plane = input.values.data() + i * plane;
      double* gi_plane = grad_input ? grad_input->values.data() + i * plane : nullptr;
      const std::size_t kbase = (static_cast<std::size_t>(o) * in.channels + i) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const double wv = weights[kbase + ky * 3 + kx];
          const int x0 = range_lo(dx);
          const int x1 = range_hi(w, dx);
          double gw = 0.0;
          for (int y = range_lo(dy); y < range_hi(h, dy); ++y) {
            const std::size_t src_row = static_cast<std::size_t>(y + dy) * w + dx;
            const double* src = src_plane + src_row;
            const double* g = g_plane + static_cast<std::size_t>(y) * w;
            for (int x = x0; x < x1; ++x) gw += g[x] * src[x];
            if (gi_plane) {
              double* gi = gi_plane + src_row;
              for (int x = x0; x < x1; ++x) gi[x] += wv * g[x];
            }
          }
          grad_weights[kbase + ky * 3 + kx] += gw;
        }
      }
    }
  }
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape);
  for (std::size_t i = 0; i < input.values.size(); ++i) out.values[i] = input.values[i] > 0.0 ? input.values[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
  require(input.shape == grad_output.shape, "relu_backward: shape mismatch");
  Tensor g(input.shape);
  for (std::size_t i = 0; i < input.values.size(); ++i) g.values[i] = input.values[i] > 0.0 ? grad_output.values[i] : 0.0;
  return g;
}

PoolOutput maxpool2(const Tensor& input) {
  const Shape in = input.shape;
  if (in.height < 2 || in.width < 2) fail(ErrorKind::InvalidArgument, "maxpool2: input side must be >= 2, got " + to_string(in));
  const Shape os{in.channels, in.height / 2, in.width / 2};
  PoolOutput res{Tensor(os), std::vector<std::uint32_t>(os.size())};
  std::size_t k = 0;
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < os.height; ++y)
      for (int x = 0; x < os.width; ++x, ++k) {
        const std::size_t base = (static_cast<std::size_t>(c) * in.height + 2 * y) * in.width + 2 * x;
        const std::size_t cand[4] = {base, base + 1, base + in.width, base + in.width + 1};
        std::size_t best = cand[0];
        for (int j = 1; j < 4; ++j)
          if (input.values[cand[j]] > input.values[best]) best = cand[j];
        res.output.values[k] = input.values[best];
        res.argmax[k] = static_cast<std::uint32_t>(best);
      }
  return res;
}

Tensor maxpool2_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax, const Tensor& grad_output) {
  require(argmax.size() == grad_output.values.size(), "maxpool2_backward: argmax size mismatch");
  Tensor g(input_shape);
  for (std::size_t k = 0; k < argmax.size(); ++k) g.values[argmax[k]] += grad_output.values[k];
  return g;
}

Tensor fully_connected(const Tensor& input, std::span<const double> weights, std::span<const double> bias, int out_features) {
  const std::size_t n_in = input.values.size();
  require(out_features >= 1, "fully_connected: out_features must be positive");
  check_count(weights, n_in * static_cast<std::size_t>(out_features), "fully_connected weights (shape mismatch?)");
  check_count(bias, static_cast<std::size_t>(out_features), "fully_connected bias");
  Tensor out(Shape{out_features, 1, 1});
  const double* x = input.values.data();
  for (int j = 0; j < out_features; ++j) {
    const double* row = weights.data() + static_cast<std::size_t>(j) * n_in;
    double s = 0.0;
    for (std::size_t k = 0; k < n_in; ++k) s += row[k] * x[k];
    out.values[static_cast<std::size_t>(j)] = s + bias[static_cast<std::size_t>(j)];
  }
  return out;
}

void fully_connected_backward(const Tensor& input, std::span<const double> weights, const Tensor& grad_output,
                              Tensor* grad_input, std::span<double> grad_weights, std::span<double> grad_bias) {
  const std::size_t n_in = input.values.size();
  const std::size_t n_out = grad_output.values.size();
  check_count(weights, n_in * n_out, "fully_connected weights");
  require(grad_weights.size() == weights.size() && grad_bias.size() == n_out, "fully_connected_backward: gradient sizes");
  if (grad_input) *grad_input = Tensor(input.shape);
  const double* x = input.values.data();
  for (std::size_t j = 0; j < n_out; ++j) {
    const double g = grad_output.values[j];
    grad_bias[j] += g;
    if (g == 0.0) continue;
    const double* row = weights.data() + j * n_in;
    double* grow = grad_weights.data() + j * n_in;
    for (std::size_t k = 0; k < n_in; ++k) grow[k] += g * x[k];
    if (grad_input) {
      double* gi = grad_input->values.data();
      for (std::size_t k = 0; k < n_in; ++k) gi[k] += g * row[k];
    }
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax of empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

SoftmaxLoss softmax_cross_entropy(std::span<const double> logits, int target) {
  require(logits.size() >= 2, "softmax_cross_entropy needs at least two classes");
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size())
    fail(ErrorKind::InvalidArgument, "target class " + std::to_string(target) + " out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  const double log_sum = std::log(sum);
  SoftmaxLoss res;
  res.loss = -(logits[static_cast<std::size_t>(target)] - m - log_sum);
  res.probabilities.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) res.probabilities[i] = std::exp(logits[i] - m - log_sum);
  res.grad_logits = res.probabilities;
  res.grad_logits[static_cast<std::size_t>(target)] -= 1.0;
  return res;
}

}  // namespace bbsel
