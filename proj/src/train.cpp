#include "bbsel/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "bbsel/common.hpp"
#include "bbsel/rng.hpp"

namespace bbsel {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& config) {
  require(params.size() == grads.size(), "adam_step: parameter and gradient sizes differ");
  if (state.m.size() != params.size()) {
    require(state.step == 0, "adam_step: state does not match parameters");
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.step;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

double accuracy(const Network& net, std::span<const Example> examples, unsigned workers) {
  require(!examples.empty(), "accuracy of an empty set");
  std::vector<char> correct(examples.size(), 0);
  parallel_for(examples.size(), workers, [&](std::size_t i) {
    const std::vector<double> logits = forward_logits(net, examples[i].input);
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    correct[i] = best == examples[i].target;
  });
  const auto hits = std::count(correct.begin(), correct.end(), 1);
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

namespace {
constexpr std::size_t kGradGroup = 4;
}

TrainResult train(Network net, std::span<const Example> train_set, std::span<const Example> val_set,
                  const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train_set.empty()) fail(ErrorKind::InvalidArgument, "training split is empty");
  // Tiny datasets can leave the validation split empty; checkpoints are then
  // scored on the training set.
  const std::span<const Example> score_set = val_set.empty() ? train_set : val_set;
  require(config.epochs >= 1, "epochs must be positive");
  require(config.batch_size >= 1, "batch size must be positive");
  for (const Example& e : train_set)
    if (e.target < 0 || e.target >= net.num_classes())
      fail(ErrorKind::InvalidArgument, "training target out of range");

  Rng rng(derive_seed(config.seed, {0x7261696e}));
  const AdamConfig adam = config.adam();
  AdamState state;
  const std::size_t n_params = net.parameter_count();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{net, {}, 0};
  double best_acc = -1.0;
  std::vector<double> grad(n_params);
  std::vector<std::vector<double>> group_grads;
  std::vector<double> group_loss;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::size_t count = end - start;
      const std::size_t groups = (count + kGradGroup - 1) / kGradGroup;
      group_grads.resize(std::max(group_grads.size(), groups));
      group_loss.assign(groups, 0.0);
      parallel_for(groups, config.workers, [&](std::size_t g) {
        auto& buf = group_grads[g];
        buf.assign(n_params, 0.0);
        const std::size_t lo = start + g * kGradGroup;
        const std::size_t hi = std::min(end, lo + kGradGroup);
        double l = 0.0;
        for (std::size_t k = lo; k < hi; ++k) {
          const Example& ex = train_set[order[k]];
          l += loss_and_gradient(net, ex.input, ex.target, buf);
        }
        group_loss[g] = l;
      });
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t g = 0; g < groups; ++g) {
        const auto& buf = group_grads[g];
        for (std::size_t i = 0; i < n_params; ++i) grad[i] += buf[i];
        batch_loss += group_loss[g];
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (double& v : grad) v *= inv;
      adam_step(net.parameters(), grad, state, adam);
      loss_sum += batch_loss * inv;
      ++batches;
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), accuracy(net, score_set, config.workers)};
    result.history.push_back(rec);
    if (rec.val_accuracy > best_acc) {
      best_acc = rec.val_accuracy;
      result.best = net;
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_acc\n";
  char buf[96];
  for (const EpochRecord& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_accuracy);
    out += buf;
  }
  return out;
}

GradCheckReport grad_check(const std::function<double(std::span<const double>)>& loss, std::span<const double> point,
                           std::span<const double> analytic_grad, const GradCheckOptions& options) {
  require(point.size() == analytic_grad.size(), "grad_check: gradient size mismatch");
  std::vector<std::size_t> idx(point.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (idx.size() > options.max_params) {
    Rng rng(options.seed);
    rng.shuffle(idx.begin(), idx.end());
    idx.resize(options.max_params);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<double> x(point.begin(), point.end());
  GradCheckReport report;
  for (std::size_t i : idx) {
    const double orig = x[i];
    x[i] = orig + options.step;
    const double up = loss(x);
    x[i] = orig - options.step;
    const double down = loss(x);
    x[i] = orig;
    const double numeric = (up - down) / (2.0 * options.step);
    const double a = analytic_grad[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.scale_floor});
    const double rel = std::abs(a - numeric) / denom;
    if (report.checked == 0 || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = i;
    }
    ++report.checked;
  }
  return report;
}

GradCheckReport grad_check(const Network& net, const Tensor& input, int target, const GradCheckOptions& options) {
  std::vector<double> grad(net.parameter_count(), 0.0);
  loss_and_gradient(net, input, target, grad);
  Network probe = net;
  auto loss = [&](std::span<const double> p) {
    std::copy(p.begin(), p.end(), probe.parameters().begin());
    return softmax_cross_entropy(forward_logits(probe, input), target).loss;
  };
  std::vector<double> point(net.parameters().begin(), net.parameters().end());
  return grad_check(loss, point, grad, options);
}

}  // namespace bbsel
