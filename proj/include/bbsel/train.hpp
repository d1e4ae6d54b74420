#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bbsel/network.hpp"

namespace bbsel {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;  // t of the most recent update
};

/// One bias-corrected Adam update; increments state.step first.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& config);

struct TrainConfig {
  int epochs = 150;
  int batch_size = 60;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  unsigned workers = 1;

  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

struct Example {
  Tensor input;
  int target = 0;  // output index
};

struct EpochRecord {
  int epoch = 0;            // 1-based
  double train_loss = 0.0;  // mean pre-update batch loss over the epoch
  double val_accuracy = 0.0;
};

struct TrainResult {
  Network best;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Mini-batch Adam over seeded per-epoch shuffles. After every epoch the
/// validation accuracy is measured; the returned network is the checkpoint
/// with the highest validation accuracy (earliest epoch on ties). An empty
/// validation set falls back to training-set accuracy.
///
/// Batch gradients are summed in fixed groups of samples and the groups are
/// reduced in order, so results do not depend on the worker count.
TrainResult train(Network net, std::span<const Example> train_set, std::span<const Example> val_set,
                  const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch = {});

double accuracy(const Network& net, std::span<const Example> examples, unsigned workers = 1);

/// "epoch,train_loss,val_acc" rows.
std::string history_csv(const std::vector<EpochRecord>& history);

// Checkpoint file: "LSNN", u16 version, architecture block, layer table,
// label map, u8 parameter width (4 or 8 bytes), u64 count, raw parameters
// in layer order (weights then bias per layer).
inline constexpr std::uint16_t kCheckpointVersion = 1;
enum class ParamPrecision : std::uint8_t { F32 = 4, F64 = 8 };

std::string encode_checkpoint(const Network& net, ParamPrecision precision = ParamPrecision::F64);
Network decode_checkpoint(std::string_view bytes);
void save_checkpoint(const Network& net, const std::filesystem::path& path, ParamPrecision precision = ParamPrecision::F64);
Network load_checkpoint(const std::filesystem::path& path);

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t max_params = 1000;
  std::uint64_t seed = 0;
  /// Denominator floor for the relative error.
  double scale_floor = 1e-6;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Central differences at up to max_params randomly chosen coordinates;
/// relative error |a - n| / max(|a|, |n|, scale_floor).
GradCheckReport grad_check(const std::function<double(std::span<const double>)>& loss, std::span<const double> point,
                           std::span<const double> analytic_grad, const GradCheckOptions& options = {});

/// Parameter gradients of the cross-entropy loss of net on one sample.
GradCheckReport grad_check(const Network& net, const Tensor& input, int target, const GradCheckOptions& options = {});

}  // namespace bbsel
