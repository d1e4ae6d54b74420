#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bbsel/io.hpp"
#include "bbsel/network.hpp"
#include "bbsel/optimizers.hpp"
#include "bbsel/problems.hpp"
#include "bbsel/sampling.hpp"
#include "bbsel/train.hpp"

namespace bbsel {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };
std::string to_string(Split s);
Split parse_split(std::string_view text);

enum class LabelKind : std::uint8_t { ProblemClass = 0, BestAlgorithm = 1 };
std::string to_string(LabelKind k);
LabelKind parse_label_kind(std::string_view text);

/// Everything needed to regenerate a SampleMatrix.
struct SampleSpec {
  std::size_t count = 0;
  int dim = 0;
  SampleMode mode = SampleMode::Random;
  std::uint64_t seed = 0;
  Bounds bounds;

  SampleMatrix materialize() const { return make_sample_matrix(count, dim, bounds, mode, seed); }
};

struct ManifestEntry {
  InstanceDescriptor instance;
  std::string image_path;  // relative to the manifest directory
  int label = 0;
  Split split = Split::Train;
};

struct DatasetManifest {
  LabelKind label_kind = LabelKind::ProblemClass;
  SampleSpec sampling;
  std::uint64_t sample_hash = 0;
  std::vector<ManifestEntry> entries;

  std::vector<std::size_t> indices(Split s) const;
};

// Line-oriented manifest:
//   version 1
//   labels <problem-class|best-algorithm>
//   samples <count> <dim> <grid|random> <seed> <lower> <upper>
//   sample_hash <hex>
//   entries <n>
//   <class_id> <dim> <seed> <image_path> <label> <split> <sample_hash>   (n lines)
// Lines starting with '#' are comments.
std::string format_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(std::string_view text);

/// Manifest plus the images, parallel to manifest.entries.
struct Dataset {
  DatasetManifest manifest;
  std::vector<LandscapeImage> images;
};

/// Writes manifest.txt and the image files into the artifact set.
void save_dataset(const Dataset& dataset, io::ArtifactSet& out, const std::string& manifest_name = "manifest.txt");
/// Loads images relative to the manifest and checks the recorded sample hash.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Per-group seeded shuffle, then the first round(0.7 n) go to train, the
/// next round(0.1 n) to validation, the rest to test.
std::vector<Split> stratified_split(const std::vector<int>& groups, std::uint64_t seed);

struct ClassDatasetConfig {
  std::vector<int> classes;
  int dim = 2;
  int instances_per_class = 250;
  std::size_t samples = 2025;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  Bounds bounds;
  std::optional<SampleMode> mode;  // default_sample_mode(dim) when unset

  SampleSpec sample_spec() const;
};

/// Instance seeds 1..instances_per_class for every class; label = class id.
Dataset generate_class_dataset(const ClassDatasetConfig& config);

struct LabelingConfig {
  long budget = 0;  // 0 means 10000 * D
  int runs = 5;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  unsigned workers = 1;

  long budget_for(int dim) const { return budget > 0 ? budget : 10000L * dim; }
};

struct LabelDecision {
  std::optional<AlgorithmId> winner;
  bool undetermined = false;
};

/// Unique argmin of the mean errors, undetermined on an exact tie for the
/// minimum or when two or more algorithms reach mean error <= epsilon.
LabelDecision decide_label(const std::array<double, 3>& mean_errors, double epsilon);

struct LabelRow {
  InstanceDescriptor instance;
  Split split = Split::Train;
  std::array<double, 3> mean_error{};
  std::array<std::vector<double>, 3> run_errors;
  LabelDecision decision;
};

std::uint64_t labeling_run_seed(std::uint64_t base, const InstanceDescriptor& d, AlgorithmId id, int run);

/// Runs every algorithm `runs` times at the full budget.
LabelRow label_by_best_algorithm(const ProblemInstance& instance, const LabelingConfig& config);

struct LabelReport {
  std::vector<LabelRow> rows;
  std::array<int, 3> eliminated{};  // per split

  std::string to_csv() const;
};

struct AlgorithmDatasetConfig {
  ClassDatasetConfig data;
  LabelingConfig labeling;
};

struct AlgorithmDataset {
  Dataset dataset;
  LabelReport report;
};

/// Images and splits as generate_class_dataset, then labels from
/// label_by_best_algorithm with undetermined instances removed.
AlgorithmDataset generate_algorithm_dataset(const AlgorithmDatasetConfig& config);

/// Output label values for a dataset: the sorted class ids, or all algorithm codes.
std::vector<int> label_space(const Dataset& dataset);

std::vector<Example> make_examples(const Dataset& dataset, Split split, const Network& net);

/// Builds the network for the dataset's label space and trains on its
/// train/val splits.
TrainResult train_on_dataset(const Dataset& dataset, const ArchitectureConfig& arch, const TrainConfig& config,
                             const std::function<void(const EpochRecord&)>& on_epoch = {});

using ImagePredictor = std::function<int(const LandscapeImage&)>;  // returns a label value

struct AccuracyRow {
  int label = 0;
  int correct = 0;
  int total = 0;
  double accuracy() const { return total > 0 ? static_cast<double>(correct) / total : 0.0; }
};

struct AccuracyTable {
  LabelKind label_kind = LabelKind::ProblemClass;
  std::vector<AccuracyRow> per_class;
  int correct = 0;
  int total = 0;

  double overall() const { return total > 0 ? static_cast<double>(correct) / total : 0.0; }
  std::string to_csv() const;
  std::string to_text() const;
};

AccuracyTable evaluate_accuracy(const ImagePredictor& predict, const Dataset& dataset, Split split, unsigned workers = 1);
AccuracyTable evaluate_accuracy(const Network& net, const Dataset& dataset, Split split, unsigned workers = 1);

using AlgorithmPredictor = std::function<AlgorithmId(const LandscapeImage&)>;
AlgorithmPredictor network_predictor(const Network& net);

struct PortfolioResult {
  AlgorithmId chosen = AlgorithmId::ABC;
  long sampling_evals = 0;
  long solving_evals = 0;
  double best_error = 0.0;           // of the solver run
  double sampling_best_error = 0.0;  // best among the imaging samples, not reused
  LandscapeImage image;
  RunResult run;
};

/// Spends samples.count evaluations on the landscape image, asks the
/// predictor for an algorithm, and runs it on the remaining budget.
PortfolioResult select_and_solve(const ProblemInstance& instance, long total_budget, const AlgorithmPredictor& predict,
                                 const SampleMatrix& samples, std::uint64_t seed);

struct MethodScore {
  int class_id = 0;
  std::string method;
  double error = 0.0;
};

struct RankTable {
  struct Row {
    int class_id = 0;
    std::vector<double> mean_error;  // per method
    std::vector<int> rank;           // 1 = best; ties share the better rank
  };
  std::vector<std::string> methods;
  std::vector<Row> rows;
  std::vector<double> average_rank;

  std::string ranks_csv() const;
  std::string errors_csv() const;
  std::string to_text() const;
};

RankTable rank_table(const std::vector<std::string>& methods, const std::vector<MethodScore>& scores);

struct BenchConfig {
  long total_budget = 0;  // 0 means 10000 * D
  int runs = 5;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  Split split = Split::Test;
};

struct BenchRecord {
  InstanceDescriptor instance;
  std::string method;
  int run = 0;
  double best_error = 0.0;
  long sampling_evals = 0;
  long solving_evals = 0;
  std::optional<AlgorithmId> chosen;
};

struct BenchResult {
  std::vector<BenchRecord> records;
  RankTable table;

  std::string records_csv() const;
};

inline const std::vector<std::string> kBenchMethods = {"Portfolio", "ABC", "CMAES", "LSHADE"};

/// Portfolio at (total - N) solving budget against each single algorithm at
/// the full budget, `runs` times per instance of the split.
BenchResult run_benchmark(const Dataset& dataset, const AlgorithmPredictor& predict, const BenchConfig& config);

}  // namespace bbsel
