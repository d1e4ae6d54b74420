#include <cstdio>
#include <limits>

#include "bbsel/common.hpp"
#include "bbsel/optimizers.hpp"

namespace bbsel {

std::string_view algorithm_name(AlgorithmId id) {
  switch (id) {
    case AlgorithmId::ABC: return "ABC";
    case AlgorithmId::CMAES: return "CMAES";
    case AlgorithmId::LSHADE: return "LSHADE";
  }
  fail(ErrorKind::InvalidArgument, "unknown algorithm id " + std::to_string(static_cast<int>(id)));
}

AlgorithmId parse_algorithm(std::string_view name) {
  for (AlgorithmId id : kAlgorithms)
    if (algorithm_name(id) == name) return id;
  fail(ErrorKind::InvalidArgument, "unknown algorithm '" + std::string(name) + "'");
}

AlgorithmId algorithm_from_code(int code) {
  if (code < 0 || code > 2) fail(ErrorKind::InvalidArgument, "unknown algorithm code " + std::to_string(code));
  return static_cast<AlgorithmId>(code);
}

BudgetedProblem::BudgetedProblem(const ProblemInstance& instance, long max_evals, long checkpoint_every)
    : instance_(&instance),
      max_evals_(max_evals),
      checkpoint_every_(checkpoint_every),
      best_error_(std::numeric_limits<double>::infinity()) {
  require(max_evals >= 0, "negative evaluation budget");
  require(checkpoint_every >= 1, "checkpoint interval must be positive");
}

std::optional<double> BudgetedProblem::evaluate(std::span<const double> x) {
  if (used_ >= max_evals_) return std::nullopt;
  const Bounds& b = instance_->bounds();
  for (double v : x)
    if (!b.contains(v)) {
      ++out_of_bounds_;
      break;
    }
  const double value = instance_->evaluate(x);
  ++used_;
  const double err = value - instance_->f_opt();
  if (err < best_error_) {
    best_error_ = err;
    best_x_.assign(x.begin(), x.end());
  }
  if (used_ % checkpoint_every_ == 0) checkpoints_.push_back({used_, best_error_});
  return value;
}

std::vector<TrajectoryPoint> BudgetedProblem::trajectory() const {
  std::vector<TrajectoryPoint> t = checkpoints_;
  if (used_ > 0 && (t.empty() || t.back().evals != used_)) t.push_back({used_, best_error_});
  return t;
}

RunResult run_algorithm(AlgorithmId id, BudgetedProblem& problem, std::uint64_t seed) {
  switch (id) {
    case AlgorithmId::ABC: return run_abc(problem, seed);
    case AlgorithmId::CMAES: return run_cmaes(problem, seed);
    case AlgorithmId::LSHADE: return run_lshade(problem, seed);
  }
  fail(ErrorKind::InvalidArgument, "unknown algorithm id " + std::to_string(static_cast<int>(id)));
}

std::string run_result_csv_header() { return "algorithm,class_id,instance_seed,run_seed,best_error,evals\n"; }

std::string run_result_csv_row(const RunResult& r, const InstanceDescriptor& instance) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "%s,%d,%llu,%llu,%.17g,%ld\n", std::string(algorithm_name(r.algorithm)).c_str(),
                instance.class_id, static_cast<unsigned long long>(instance.seed),
                static_cast<unsigned long long>(r.seed), r.best_error, r.evals_used);
  return buf;
}

}  // namespace bbsel
