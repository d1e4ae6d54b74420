#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "bbsel/common.hpp"
#include "bbsel/network.hpp"
#include "bbsel/rng.hpp"
#include "bbsel/tensor.hpp"
#include "bbsel/train.hpp"

using namespace bbsel;

namespace {

Tensor random_tensor(Shape s, Rng& rng) {
  Tensor t(s);
  for (double& v : t.values) v = rng.normal();
  return t;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// Direct definition with explicit zero padding.
Tensor naive_conv(const Tensor& in, const std::vector<double>& w, const std::vector<double>& b, int out_c) {
  const auto [c_in, h, wd] = in.shape;
  Tensor out({out_c, h, wd});
  for (int o = 0; o < out_c; ++o)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < wd; ++x) {
        double s = b[static_cast<std::size_t>(o)];
        for (int c = 0; c < c_in; ++c)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy < 0 || yy >= h || xx < 0 || xx >= wd) continue;
              s += w[static_cast<std::size_t>(((o * c_in + c) * 3 + (dy + 1)) * 3 + (dx + 1))] * in.at(c, yy, xx);
            }
        out.at(o, y, x) = s;
      }
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Network tiny_net(std::uint64_t seed, int classes = 2) {
  return Network::from_layers({1, 8, 8},
                              {{LayerKind::Conv3x3, 4},
                               {LayerKind::Relu},
                               {LayerKind::MaxPool2},
                               {LayerKind::FullyConnected, 16},
                               {LayerKind::Relu},
                               {LayerKind::FullyConnected, classes}},
                              seed);
}

}  // namespace

TEST_CASE("conv3x3 matches the direct definition") {
  Rng rng(1);
  const Tensor in = random_tensor({3, 5, 6}, rng);
  const auto w = random_vector(2 * 3 * 9, rng);
  const auto b = random_vector(2, rng);
  const Tensor out = conv3x3(in, w, b, 2);
  const Tensor ref = naive_conv(in, w, b, 2);
  REQUIRE(out.shape == ref.shape);
  for (std::size_t i = 0; i < out.values.size(); ++i) CHECK(out.values[i] == doctest::Approx(ref.values[i]).epsilon(1e-12));
}

TEST_CASE("conv3x3 backward matches finite differences") {
  Rng rng(2);
  Tensor in = random_tensor({2, 4, 5}, rng);
  auto w = random_vector(3 * 2 * 9, rng);
  auto b = random_vector(3, rng);
  const auto probe = random_vector(3 * 4 * 5, rng);  // L = <probe, conv(in)>
  auto loss = [&] { return dot(conv3x3(in, w, b, 3).values, probe); };

  Tensor g_out({3, 4, 5}, probe);
  Tensor g_in;
  std::vector<double> g_w(w.size(), 0.0), g_b(b.size(), 0.0);
  conv3x3_backward(in, w, g_out, &g_in, g_w, g_b);

  const double h = 1e-6;
  auto fd = [&](double& x) {
    const double saved = x;
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    return (up - down) / (2 * h);
  };
  for (std::size_t i = 0; i < in.values.size(); ++i) CHECK(g_in.values[i] == doctest::Approx(fd(in.values[i])).epsilon(1e-6));
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(g_w[i] == doctest::Approx(fd(w[i])).epsilon(1e-6));
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(g_b[i] == doctest::Approx(fd(b[i])).epsilon(1e-6));
}

TEST_CASE("fully connected forward and backward") {
  Rng rng(3);
  Tensor in = random_tensor({2, 3, 1}, rng);
  auto w = random_vector(4 * 6, rng);
  auto b = random_vector(4, rng);
  const Tensor out = fully_connected(in, w, b, 4);
  for (int o = 0; o < 4; ++o) {
    double s = b[static_cast<std::size_t>(o)];
    for (int i = 0; i < 6; ++i) s += w[static_cast<std::size_t>(o * 6 + i)] * in.values[static_cast<std::size_t>(i)];
    CHECK(out.values[static_cast<std::size_t>(o)] == doctest::Approx(s));
  }
  const auto probe = random_vector(4, rng);
  Tensor g_in;
  std::vector<double> g_w(w.size(), 0.0), g_b(b.size(), 0.0);
  fully_connected_backward(in, w, Tensor({4, 1, 1}, probe), &g_in, g_w, g_b);
  for (int o = 0; o < 4; ++o) {
    CHECK(g_b[static_cast<std::size_t>(o)] == probe[static_cast<std::size_t>(o)]);
    for (int i = 0; i < 6; ++i)
      CHECK(g_w[static_cast<std::size_t>(o * 6 + i)] ==
            doctest::Approx(probe[static_cast<std::size_t>(o)] * in.values[static_cast<std::size_t>(i)]));
  }
  for (int i = 0; i < 6; ++i) {
    double s = 0;
    for (int o = 0; o < 4; ++o) s += probe[static_cast<std::size_t>(o)] * w[static_cast<std::size_t>(o * 6 + i)];
    CHECK(g_in.values[static_cast<std::size_t>(i)] == doctest::Approx(s));
  }
}

TEST_CASE("max-pool floor mode, first-index ties, and routing") {
  Tensor in({1, 5, 5});
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) in.at(0, y, x) = y * 5 + x;
  in.at(0, 0, 0) = 6.0;  // ties with (1, 1)
  const auto p = maxpool2(in);
  REQUIRE(p.output.shape == Shape{1, 2, 2});
  CHECK(p.output.at(0, 0, 0) == 6.0);
  CHECK(p.argmax[0] == 0);  // first in window order wins the tie
  CHECK(p.output.at(0, 0, 1) == 8.0);
  CHECK(p.output.at(0, 1, 1) == 18.0);
  const Tensor g = maxpool2_backward(in.shape, p.argmax, Tensor({1, 2, 2}, {1.0, 2.0, 3.0, 4.0}));
  CHECK(g.at(0, 0, 0) == 1.0);
  CHECK(g.at(0, 1, 1) == 0.0);
  CHECK(g.at(0, 1, 3) == 2.0);
  CHECK(g.at(0, 3, 3) == 4.0);
  CHECK(g.at(0, 4, 4) == 0.0);  // dropped border
}

TEST_CASE("relu and its subgradient") {
  const Tensor in({1, 1, 4}, {-1.0, 0.0, 2.0, -0.5});
  const Tensor r = relu(in);
  CHECK(r.values == std::vector<double>{0.0, 0.0, 2.0, 0.0});
  const Tensor g = relu_backward(in, Tensor({1, 1, 4}, {1.0, 1.0, 1.0, 1.0}));
  CHECK(g.values == std::vector<double>{0.0, 0.0, 1.0, 0.0});
}

TEST_CASE("softmax is stable and cross-entropy matches log-sum-exp") {
  const std::vector<double> logits = {1000.0, 1001.0, 999.0};
  const auto p = softmax(logits);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
  const double lse = 1001.0 + std::log(std::exp(-1.0) + 1.0 + std::exp(-2.0));
  const auto l = softmax_cross_entropy(logits, 2);
  CHECK(l.loss == doctest::Approx(lse - 999.0));
  CHECK(l.grad_logits[2] == doctest::Approx(p[2] - 1.0));
  CHECK(l.grad_logits[0] == doctest::Approx(p[0]));
  CHECK_THROWS_AS(softmax_cross_entropy(logits, 3), Error);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, -1), Error);
}

TEST_CASE("width scale parsing") {
  CHECK(WidthScale::parse("1/8") == WidthScale{1, 8});
  CHECK(WidthScale::parse("0.125").apply(64) == 8);
  CHECK(WidthScale::parse("1").apply(4096) == 4096);
  CHECK(WidthScale{1, 16}.apply(64) == 4);
  CHECK(WidthScale{1, 1000}.apply(64) == 1);
  CHECK_THROWS_AS(WidthScale::parse("0"), Error);
  CHECK_THROWS_AS(WidthScale::parse("abc"), Error);
  CHECK_THROWS_AS(WidthScale::parse("-1/2"), Error);
}

TEST_CASE("variant shape chains") {
  const auto a = Network::build(ArchitectureConfig::variant_a(3, {1, 16}, 1));
  CHECK(a.input_shape() == Shape{1, 100, 100});
  std::vector<int> a_pools;
  for (const auto& l : a.layers())
    if (l.spec.kind == LayerKind::MaxPool2) a_pools.push_back(l.output.height);
  CHECK(a_pools == std::vector<int>{50, 25, 12, 6, 3});
  CHECK(a.output_shape() == Shape{3, 1, 1});

  const auto b = Network::build(ArchitectureConfig::variant_b(2, {1, 16}, 1));
  std::vector<int> b_pools;
  int convs = 0;
  for (const auto& l : b.layers()) {
    if (l.spec.kind == LayerKind::MaxPool2) b_pools.push_back(l.output.height);
    if (l.spec.kind == LayerKind::Conv3x3) ++convs;
  }
  CHECK(b_pools == std::vector<int>{22, 11, 5, 2});
  CHECK(convs == 10);
  CHECK(b.layers().front().output.channels == 4);

  ArchitectureConfig too_small = ArchitectureConfig::variant_a(2, {1, 16}, 1);
  too_small.input_side = 16;
  try {
    Network::build(too_small);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

TEST_CASE("initialization scales and zero biases") {
  const auto net = Network::from_layers({64, 1, 1}, {{LayerKind::FullyConnected, 500}, {LayerKind::Relu},
                                                     {LayerKind::FullyConnected, 400}}, 3);
  const auto p = net.parameters();
  const auto& l0 = net.layers()[0];
  const auto& l2 = net.layers()[2];
  auto variance = [&](const Layer& l) {
    double s = 0;
    for (std::size_t k = 0; k < l.weight_count; ++k) s += p[l.weight_offset + k] * p[l.weight_offset + k];
    return s / static_cast<double>(l.weight_count);
  };
  CHECK(variance(l0) == doctest::Approx(2.0 / 64).epsilon(0.05));
  CHECK(variance(l2) == doctest::Approx(1.0 / 500).epsilon(0.05));
  for (std::size_t k = 0; k < l0.bias_count; ++k) CHECK(p[l0.bias_offset + k] == 0.0);
}

TEST_CASE("network parameter gradients pass a finite-difference check") {
  const auto net = tiny_net(5, 3);
  Rng rng(6);
  const Tensor x = random_tensor({1, 8, 8}, rng);
  GradCheckOptions opt;
  opt.max_params = 2000;
  const auto r = grad_check(net, x, 1, opt);
  CHECK(r.checked == net.parameter_count());
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("input gradient matches finite differences") {
  const auto net = tiny_net(7);
  Rng rng(8);
  Tensor x = random_tensor({1, 8, 8}, rng);
  std::vector<double> grad(net.parameter_count(), 0.0);
  Tensor gx;
  loss_and_gradient(net, x, 0, grad, &gx);
  const double h = 1e-6;
  std::vector<double> scratch(net.parameter_count());
  for (std::size_t i = 0; i < x.values.size(); i += 7) {
    const double saved = x.values[i];
    x.values[i] = saved + h;
    const double up = loss_and_gradient(net, x, 0, scratch);
    x.values[i] = saved - h;
    const double down = loss_and_gradient(net, x, 0, scratch);
    x.values[i] = saved;
    CHECK(gx.values[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("grad_check detects a wrong gradient") {
  auto loss = [](std::span<const double> p) { return p[0] * p[0] + 3.0 * p[1]; };
  const std::vector<double> point = {1.5, -2.0};
  const auto good = grad_check(loss, point, std::vector<double>{3.0, 3.0});
  CHECK(good.max_relative_error < 1e-8);
  const auto bad = grad_check(loss, point, std::vector<double>{3.0, 3.3});
  CHECK(bad.max_relative_error > 0.05);
  CHECK(bad.worst_index == 1);
}

TEST_CASE("adam step against hand computation") {
  std::vector<double> p = {1.0};
  const std::vector<double> g = {0.5};
  AdamState s;
  AdamConfig c{0.1, 0.9, 0.999, 1e-8};
  adam_step(p, g, s, c);
  // m = 0.05, v = 0.00025, bias-corrected 0.5 and 0.25
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
  CHECK(s.step == 1);
  adam_step(p, g, s, c);
  const double m2 = (0.9 * 0.05 + 0.1 * 0.5) / (1 - 0.81);
  const double v2 = (0.999 * 0.00025 + 0.001 * 0.25) / (1 - 0.998001);
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 - 0.1 * m2 / (std::sqrt(v2) + 1e-8)));
}

TEST_CASE("forward checks the image size and predicts the lowest tied index") {
  const auto net = Network::build(ArchitectureConfig::variant_b(2, {1, 16}, 1));
  const LandscapeImage wrong{10, std::vector<float>(100, 0.5f)};
  CHECK_THROWS_AS(forward(net, wrong), Error);
  auto zero = Network::from_layers({1, 2, 2}, {{LayerKind::FullyConnected, 3}}, 1);
  for (double& v : zero.parameters()) v = 0.0;
  const LandscapeImage img{2, {0.1f, 0.2f, 0.3f, 0.4f}};
  CHECK(predict_index(zero, img) == 0);
  zero.set_labels({7, 9, 11});
  CHECK(predict_label(zero, img) == 7);
  CHECK(zero.index_of_label(11) == 2);
  CHECK_THROWS_AS(zero.index_of_label(8), Error);
  CHECK_THROWS_AS(zero.set_labels({1, 2}), Error);
}

TEST_CASE("checkpoints round-trip bit-exactly in 8-byte mode") {
  auto net = Network::build(ArchitectureConfig::variant_b(3, {1, 16}, 9));
  net.set_labels({1, 3, 4});
  const std::string bytes = encode_checkpoint(net);
  const Network back = decode_checkpoint(bytes);
  CHECK(back.parameter_count() == net.parameter_count());
  CHECK(std::equal(back.parameters().begin(), back.parameters().end(), net.parameters().begin()));
  CHECK(back.labels() == net.labels());
  CHECK(back.specs() == net.specs());
  CHECK(back.config().variant == Variant::B);
  CHECK(back.config().width_scale == WidthScale{1, 16});
  CHECK(encode_checkpoint(back) == bytes);

  const Network f32 = decode_checkpoint(encode_checkpoint(net, ParamPrecision::F32));
  for (std::size_t i = 0; i < net.parameter_count(); ++i)
    CHECK(f32.parameters()[i] == static_cast<double>(static_cast<float>(net.parameters()[i])));

  auto expect_format = [](std::string_view b) {
    try {
      decode_checkpoint(b);
      FAIL("expected a format error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Format);
    }
  };
  expect_format(std::string_view(bytes).substr(0, bytes.size() - 3));
  expect_format(bytes + "z");
  std::string bad = bytes;
  bad[1] = 'X';
  expect_format(bad);
  expect_format("");

  const auto path = std::filesystem::temp_directory_path() / "bbsel_test_model.lsnn";
  save_checkpoint(net, path);
  const Network loaded = load_checkpoint(path);
  const LandscapeImage img{45, std::vector<float>(45 * 45, 0.25f)};
  CHECK(forward(loaded, img) == forward(net, img));
  std::filesystem::remove(path);
}

TEST_CASE("training is deterministic and independent of the worker count") {
  Rng rng(10);
  std::vector<Example> data;
  for (int i = 0; i < 12; ++i) data.push_back({random_tensor({1, 8, 8}, rng), i % 2});
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 5;
  c.learning_rate = 1e-3;
  c.seed = 4;
  c.workers = 1;
  const auto one = train(tiny_net(1), data, data, c);
  c.workers = 3;
  const auto three = train(tiny_net(1), data, data, c);
  CHECK(history_csv(one.history) == history_csv(three.history));
  CHECK(encode_checkpoint(one.best) == encode_checkpoint(three.best));
  CHECK(one.history.size() == 3);
}

TEST_CASE("validation-best checkpoint is kept") {
  Rng rng(11);
  std::vector<Example> data;
  for (int i = 0; i < 8; ++i) data.push_back({random_tensor({1, 8, 8}, rng), i % 2});
  TrainConfig c;
  c.epochs = 6;
  c.batch_size = 4;
  c.learning_rate = 1e-2;
  std::vector<EpochRecord> seen;
  const auto r = train(tiny_net(2), data, data, c, [&](const EpochRecord& e) { seen.push_back(e); });
  CHECK(seen.size() == 6);
  double best = -1;
  int best_epoch = 0;
  for (const auto& e : r.history)
    if (e.val_accuracy > best) {
      best = e.val_accuracy;
      best_epoch = e.epoch;
    }
  CHECK(r.best_epoch == best_epoch);
  CHECK(accuracy(r.best, data) == doctest::Approx(best));
}

TEST_CASE("a tiny net overfits four samples") {
  Rng rng(12);
  std::vector<Example> data;
  for (int i = 0; i < 4; ++i) data.push_back({random_tensor({1, 8, 8}, rng), i % 2});
  TrainConfig c;
  c.epochs = 500;
  c.batch_size = 4;
  c.learning_rate = 1e-3;
  int reached = 0;
  train(tiny_net(3), data, data, c, [&](const EpochRecord& e) {
    if (!reached && e.train_loss < 0.01) reached = e.epoch;
  });
  CHECK(reached > 0);
  CHECK(reached <= 500);
}

TEST_CASE("training rejects bad inputs") {
  Rng rng(13);
  std::vector<Example> data = {{random_tensor({1, 8, 8}, rng), 5}};
  TrainConfig c;
  c.epochs = 1;
  CHECK_THROWS_AS(train(tiny_net(1), data, data, c), Error);
  CHECK_THROWS_AS(train(tiny_net(1), {}, data, c), Error);
}
