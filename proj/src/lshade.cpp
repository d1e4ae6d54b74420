// L-SHADE: current-to-pbest/1/bin with an external archive, success-history
// adaptation of F and CR, and linear population size reduction.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bbsel/common.hpp"
#include "bbsel/optimizers.hpp"
#include "bbsel/rng.hpp"

namespace bbsel {

int lshade_population_size(long nfe, long max_nfe, int n_init, int n_min) {
  require(max_nfe > 0, "max_nfe must be positive");
  const double frac = static_cast<double>(std::clamp(nfe, 0L, max_nfe)) / static_cast<double>(max_nfe);
  return static_cast<int>(std::lround(n_init + (n_min - n_init) * frac));
}

namespace {

constexpr double kTerminalCr = -1.0;  // memory value after CR collapses to 0

// Weighted Lehmer mean sum(w s^2) / sum(w s).
double lehmer_mean(const std::vector<double>& s, const std::vector<double>& w) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    num += w[i] * s[i] * s[i];
    den += w[i] * s[i];
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace

RunResult run_lshade(BudgetedProblem& problem, std::uint64_t seed, const LshadeSettings& settings) {
  const int n_init = settings.initial_population;
  const int n_min = settings.min_population;
  require(n_min >= 4 && n_init >= n_min, "L-SHADE needs 4 <= min_population <= initial_population");
  if (problem.remaining() < n_init)
    fail(ErrorKind::InvalidArgument,
         "L-SHADE needs a budget of at least the initial population " + std::to_string(n_init));

  const auto dim = static_cast<std::size_t>(problem.dim());
  const Bounds b = problem.bounds();
  const long max_nfe = problem.remaining();
  const long start_nfe = problem.used();
  const auto h = static_cast<std::size_t>(settings.history_size);
  Rng rng(seed);

  RunResult result;
  result.algorithm = AlgorithmId::LSHADE;
  result.seed = seed;
  auto finish = [&] {
    result.best_error = problem.best_error();
    result.evals_used = problem.used();
    result.trajectory = problem.trajectory();
    return result;
  };

  std::vector<std::vector<double>> pop(static_cast<std::size_t>(n_init), std::vector<double>(dim));
  std::vector<double> fit(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    for (double& v : pop[i]) v = rng.uniform(b.lower, b.upper);
    fit[i] = *problem.evaluate(pop[i]);
  }
  result.generation_sizes.push_back(n_init);

  std::vector<double> mem_cr(h, 0.5);
  std::vector<double> mem_f(h, 0.5);
  std::size_t mem_pos = 0;
  std::vector<std::vector<double>> archive;

  std::vector<std::vector<double>> trial;
  std::vector<double> trial_fit;
  std::vector<double> cr_used;
  std::vector<double> f_used;
  std::vector<std::size_t> sorted;
  std::vector<double> s_cr, s_f, s_df;

  while (!problem.exhausted()) {
    const std::size_t np = pop.size();
    result.generation_sizes.push_back(static_cast<int>(np));
    sorted.resize(np);
    std::iota(sorted.begin(), sorted.end(), 0);
    std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t c) { return fit[a] < fit[c]; });
    const std::size_t p_count =
        std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(settings.p_best_rate * static_cast<double>(np))));

    trial.assign(np, std::vector<double>(dim));
    cr_used.resize(np);
    f_used.resize(np);
    for (std::size_t i = 0; i < np; ++i) {
      const std::size_t r = rng.index(h);
      const double cr = mem_cr[r] == kTerminalCr ? 0.0 : std::clamp(rng.normal(mem_cr[r], 0.1), 0.0, 1.0);
      double f = 0.0;
      do {
        f = rng.cauchy(mem_f[r], 0.1);
      } while (f <= 0.0);
      f = std::min(f, 1.0);
      cr_used[i] = cr;
      f_used[i] = f;

      const std::size_t pbest = sorted[rng.index(p_count)];
      std::size_t r1;
      do {
        r1 = rng.index(np);
      } while (r1 == i);
      std::size_t r2;
      do {
        r2 = rng.index(np + archive.size());
      } while (r2 == i || r2 == r1);
      const auto& x = pop[i];
      const auto& xp = pop[pbest];
      const auto& x1 = pop[r1];
      const auto& x2 = r2 < np ? pop[r2] : archive[r2 - np];

      const std::size_t j_rand = rng.index(dim);
      auto& u = trial[i];
      for (std::size_t j = 0; j < dim; ++j) {
        if (j == j_rand || rng.uniform() < cr) {
          double v = x[j] + f * (xp[j] - x[j]) + f * (x1[j] - x2[j]);
          if (v < b.lower) v = 0.5 * (b.lower + x[j]);
          if (v > b.upper) v = 0.5 * (b.upper + x[j]);
          u[j] = v;
        } else {
          u[j] = x[j];
        }
      }
    }

    trial_fit.assign(np, std::numeric_limits<double>::infinity());
    std::size_t evaluated = 0;
    for (std::size_t i = 0; i < np; ++i) {
      const auto v = problem.evaluate(trial[i]);
      if (!v) break;
      trial_fit[i] = *v;
      ++evaluated;
    }

    s_cr.clear();
    s_f.clear();
    s_df.clear();
    for (std::size_t i = 0; i < evaluated; ++i) {
      if (trial_fit[i] < fit[i]) {
        archive.push_back(pop[i]);
        s_cr.push_back(cr_used[i]);
        s_f.push_back(f_used[i]);
        s_df.push_back(fit[i] - trial_fit[i]);
      }
      if (trial_fit[i] <= fit[i]) {
        pop[i] = std::move(trial[i]);
        fit[i] = trial_fit[i];
      }
    }
    if (evaluated < np) break;

    if (!s_f.empty()) {
      const double total = std::accumulate(s_df.begin(), s_df.end(), 0.0);
      std::vector<double> w(s_df.size());
      for (std::size_t k = 0; k < w.size(); ++k) w[k] = total > 0.0 ? s_df[k] / total : 1.0 / w.size();
      const double max_cr = *std::max_element(s_cr.begin(), s_cr.end());
      if (mem_cr[mem_pos] == kTerminalCr || max_cr == 0.0)
        mem_cr[mem_pos] = kTerminalCr;
      else
        mem_cr[mem_pos] = lehmer_mean(s_cr, w);
      mem_f[mem_pos] = lehmer_mean(s_f, w);
      mem_pos = (mem_pos + 1) % h;
    }

    const int next = lshade_population_size(problem.used() - start_nfe, max_nfe, n_init, n_min);
    if (next < static_cast<int>(np)) {
      sorted.resize(np);
      std::iota(sorted.begin(), sorted.end(), 0);
      std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t c) { return fit[a] < fit[c]; });
      std::vector<std::vector<double>> kept_pop;
      std::vector<double> kept_fit;
      for (int k = 0; k < next; ++k) {
        kept_pop.push_back(std::move(pop[sorted[static_cast<std::size_t>(k)]]));
        kept_fit.push_back(fit[sorted[static_cast<std::size_t>(k)]]);
      }
      pop = std::move(kept_pop);
      fit = std::move(kept_fit);
    }

    const auto capacity = static_cast<std::size_t>(std::lround(settings.archive_rate * static_cast<double>(pop.size())));
    while (archive.size() > capacity) {
      const std::size_t k = rng.index(archive.size());
      archive[k] = std::move(archive.back());
      archive.pop_back();
    }
  }
  return finish();
}

}  // namespace bbsel
