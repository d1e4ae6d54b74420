#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bbsel/problems.hpp"

namespace bbsel {

/// Stable integer codes double as class labels.
enum class AlgorithmId : int { ABC = 0, CMAES = 1, LSHADE = 2 };

inline constexpr std::array<AlgorithmId, 3> kAlgorithms = {AlgorithmId::ABC, AlgorithmId::CMAES, AlgorithmId::LSHADE};

std::string_view algorithm_name(AlgorithmId id);
AlgorithmId parse_algorithm(std::string_view name);
AlgorithmId algorithm_from_code(int code);

struct TrajectoryPoint {
  long evals;
  double best_error;
  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

/// Evaluation gate around an instance. Attempts beyond max_evals are
/// refused; the best error is tracked over every accepted evaluation.
class BudgetedProblem {
 public:
  BudgetedProblem(const ProblemInstance& instance, long max_evals, long checkpoint_every = 100);

  /// nullopt once the budget is spent.
  std::optional<double> evaluate(std::span<const double> x);

  bool exhausted() const { return used_ >= max_evals_; }
  long remaining() const { return max_evals_ - used_; }
  long used() const { return used_; }
  long max_evals() const { return max_evals_; }
  double best_error() const { return best_error_; }
  const std::vector<double>& best_x() const { return best_x_; }
  long out_of_bounds_evals() const { return out_of_bounds_; }

  /// Checkpoints every checkpoint_every evaluations plus the latest point.
  std::vector<TrajectoryPoint> trajectory() const;

  const ProblemInstance& instance() const { return *instance_; }
  int dim() const { return instance_->dim(); }
  const Bounds& bounds() const { return instance_->bounds(); }

 private:
  const ProblemInstance* instance_;
  long max_evals_;
  long checkpoint_every_;
  long used_ = 0;
  long out_of_bounds_ = 0;
  double best_error_;
  std::vector<double> best_x_;
  std::vector<TrajectoryPoint> checkpoints_;
};

struct RunResult {
  AlgorithmId algorithm = AlgorithmId::ABC;
  std::uint64_t seed = 0;
  double best_error = 0.0;
  long evals_used = 0;
  std::vector<TrajectoryPoint> trajectory;
  /// Evaluations attempted per generation (population size for L-SHADE).
  std::vector<int> generation_sizes;
};

struct AbcSettings {
  int food_sources = 125;
  /// Abandonment limit; 0 means food_sources * D.
  int limit = 0;
};

struct CmaesSettings {
  int lambda = 40;
  int mu = 20;
  /// Initial step size as a fraction of the box width (0.3 * 10 = 3).
  double sigma_fraction = 0.3;
  int max_resamples = 100;
  /// Called after every generation's update with the covariance and step size.
  std::function<void(const Eigen::MatrixXd&, double)> on_generation;
};

struct LshadeSettings {
  int initial_population = 200;
  int min_population = 4;
  int history_size = 6;
  double p_best_rate = 0.11;
  double archive_rate = 2.6;
};

RunResult run_abc(BudgetedProblem& problem, std::uint64_t seed, const AbcSettings& settings = {});
RunResult run_cmaes(BudgetedProblem& problem, std::uint64_t seed, const CmaesSettings& settings = {});
RunResult run_lshade(BudgetedProblem& problem, std::uint64_t seed, const LshadeSettings& settings = {});
RunResult run_algorithm(AlgorithmId id, BudgetedProblem& problem, std::uint64_t seed);

/// Linear population size reduction: round(n_init + (n_min - n_init) * nfe / max_nfe).
int lshade_population_size(long nfe, long max_nfe, int n_init, int n_min);

/// "algorithm,class_id,instance_seed,run_seed,best_error,evals"
std::string run_result_csv_header();
std::string run_result_csv_row(const RunResult& r, const InstanceDescriptor& instance);

}  // namespace bbsel
