// Artificial bee colony: employed, onlooker, and scout phases over a fixed
// set of food sources. Violated coordinates are resampled uniformly.

#include <algorithm>
#include <cmath>
#include <limits>

#include "bbsel/common.hpp"
#include "bbsel/optimizers.hpp"
#include "bbsel/rng.hpp"

namespace bbsel {

namespace {

double abc_fitness(double f) { return f >= 0.0 ? 1.0 / (1.0 + f) : 1.0 + std::abs(f); }

struct FoodSource {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  int trials = 0;
};

}  // namespace

RunResult run_abc(BudgetedProblem& problem, std::uint64_t seed, const AbcSettings& settings) {
  if (problem.remaining() < 1) fail(ErrorKind::InvalidArgument, "ABC needs a positive evaluation budget");
  require(settings.food_sources >= 2, "ABC needs at least two food sources");
  const int dim = problem.dim();
  const auto sn = static_cast<std::size_t>(settings.food_sources);
  const int limit = settings.limit > 0 ? settings.limit : settings.food_sources * dim;
  const Bounds b = problem.bounds();
  Rng rng(seed);

  RunResult result;
  result.algorithm = AlgorithmId::ABC;
  result.seed = seed;

  auto finish = [&] {
    result.best_error = problem.best_error();
    result.evals_used = problem.used();
    result.trajectory = problem.trajectory();
    return result;
  };

  auto random_point = [&] {
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (double& v : x) v = rng.uniform(b.lower, b.upper);
    return x;
  };

  std::vector<FoodSource> food(sn);
  for (auto& f : food) {
    f.x = random_point();
    const auto v = problem.evaluate(f.x);
    if (!v) return finish();
    f.value = *v;
  }
  result.generation_sizes.push_back(static_cast<int>(sn));

  std::vector<double> candidate(static_cast<std::size_t>(dim));
  // Returns false when the budget ran out.
  auto explore = [&](std::size_t i) {
    std::size_t k = rng.index(sn - 1);
    if (k >= i) ++k;
    const std::size_t j = rng.index(static_cast<std::size_t>(dim));
    candidate = food[i].x;
    const double phi = rng.uniform(-1.0, 1.0);
    double v = food[i].x[j] + phi * (food[i].x[j] - food[k].x[j]);
    if (!b.contains(v)) v = rng.uniform(b.lower, b.upper);
    candidate[j] = v;
    const auto value = problem.evaluate(candidate);
    if (!value) return false;
    if (*value < food[i].value) {
      food[i].x = candidate;
      food[i].value = *value;
      food[i].trials = 0;
    } else {
      ++food[i].trials;
    }
    return true;
  };

  std::vector<double> cumulative(sn);
  while (!problem.exhausted()) {
    const long before = problem.used();

    for (std::size_t i = 0; i < sn; ++i)
      if (!explore(i)) return finish();

    double total = 0.0;
    for (std::size_t i = 0; i < sn; ++i) {
      total += abc_fitness(food[i].value);
      cumulative[i] = total;
    }
    for (std::size_t n = 0; n < sn; ++n) {
      const double r = rng.uniform() * total;
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
      const auto i = std::min(static_cast<std::size_t>(it - cumulative.begin()), sn - 1);
      if (!explore(i)) return finish();
    }

    const auto worst = std::max_element(food.begin(), food.end(),
                                        [](const FoodSource& a, const FoodSource& c) { return a.trials < c.trials; });
    if (worst->trials > limit) {
      worst->x = random_point();
      worst->trials = 0;
      const auto v = problem.evaluate(worst->x);
      if (!v) {
        // The scout could not be evaluated; keep the bookkeeping consistent.
        worst->value = std::numeric_limits<double>::infinity();
        result.generation_sizes.push_back(static_cast<int>(problem.used() - before));
        return finish();
      }
      worst->value = *v;
    }
    result.generation_sizes.push_back(static_cast<int>(problem.used() - before));
  }
  return finish();
}

}  // namespace bbsel
