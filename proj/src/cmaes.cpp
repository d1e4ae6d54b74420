// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and
// rank-one plus rank-mu covariance updates. No restarts.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bbsel/common.hpp"
#include "bbsel/optimizers.hpp"
#include "bbsel/rng.hpp"

namespace bbsel {

RunResult run_cmaes(BudgetedProblem& problem, std::uint64_t seed, const CmaesSettings& settings) {
  const int lambda = settings.lambda;
  const int mu = settings.mu;
  require(mu >= 1 && mu <= lambda, "CMA-ES needs 1 <= mu <= lambda");
  if (problem.remaining() < lambda)
    fail(ErrorKind::InvalidArgument, "CMA-ES needs a budget of at least lambda = " + std::to_string(lambda));

  const int n = problem.dim();
  const double nd = n;
  const Bounds b = problem.bounds();
  Rng rng(seed);

  Eigen::VectorXd weights(mu);
  for (int i = 0; i < mu; ++i) weights(i) = std::log(mu + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mu_eff = 1.0 / weights.squaredNorm();

  const double c_sigma = (mu_eff + 2.0) / (nd + mu_eff + 5.0);
  const double d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (nd + 1.0)) - 1.0) + c_sigma;
  const double c_c = (4.0 + mu_eff / nd) / (nd + 4.0 + 2.0 * mu_eff / nd);
  const double c_1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + mu_eff);
  const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nd + 2.0) * (nd + 2.0) + mu_eff));
  const double chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

  Eigen::VectorXd mean(n);
  for (int i = 0; i < n; ++i) mean(i) = rng.uniform(b.lower, b.upper);
  double sigma = settings.sigma_fraction * b.width();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd p_sigma = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd p_c = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd scales = Eigen::VectorXd::Ones(n);  // sqrt of eigenvalues

  RunResult result;
  result.algorithm = AlgorithmId::CMAES;
  result.seed = seed;

  Eigen::MatrixXd xs(n, lambda);
  Eigen::MatrixXd ys(n, lambda);
  std::vector<double> values(static_cast<std::size_t>(lambda));
  std::vector<int> order(static_cast<std::size_t>(lambda));
  Eigen::VectorXd z(n);
  Eigen::VectorXd x(n);
  long generation = 0;

  auto inside = [&](const Eigen::VectorXd& v) {
    for (int i = 0; i < n; ++i)
      if (!b.contains(v(i))) return false;
    return true;
  };

  while (!problem.exhausted()) {
    result.generation_sizes.push_back(lambda);
    int done = 0;
    for (int k = 0; k < lambda; ++k) {
      for (int attempt = 0;; ++attempt) {
        for (int i = 0; i < n; ++i) z(i) = rng.normal();
        x = mean + sigma * (basis * scales.cwiseProduct(z));
        if (inside(x)) break;
        if (attempt + 1 >= settings.max_resamples) {
          for (int i = 0; i < n; ++i) x(i) = std::clamp(x(i), b.lower, b.upper);
          break;
        }
      }
      const auto v = problem.evaluate(std::span<const double>(x.data(), static_cast<std::size_t>(n)));
      if (!v) break;
      xs.col(k) = x;
      ys.col(k) = (x - mean) / sigma;
      values[static_cast<std::size_t>(k)] = *v;
      ++done;
    }
    if (done < lambda) break;  // budget ran out mid-generation
    ++generation;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int c) {
      return values[static_cast<std::size_t>(a)] < values[static_cast<std::size_t>(c)];
    });

    Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) y_w += weights(i) * ys.col(order[static_cast<std::size_t>(i)]);
    mean += sigma * y_w;

    // C^{-1/2} y_w = B D^{-1} B^T y_w
    const Eigen::VectorXd inv_sqrt_y = basis * (basis.transpose() * y_w).cwiseQuotient(scales);
    p_sigma = (1.0 - c_sigma) * p_sigma + std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * inv_sqrt_y;
    const double ps_norm = p_sigma.norm();
    const double decay = 1.0 - std::pow(1.0 - c_sigma, 2.0 * static_cast<double>(generation));
    const bool h_sigma = ps_norm / std::sqrt(decay) < (1.4 + 2.0 / (nd + 1.0)) * chi_n;
    p_c = (1.0 - c_c) * p_c + (h_sigma ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) : 0.0) * y_w;
    const double delta = h_sigma ? 0.0 : c_c * (2.0 - c_c);

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const auto y = ys.col(order[static_cast<std::size_t>(i)]);
      rank_mu.noalias() += weights(i) * (y * y.transpose());
    }
    cov = (1.0 - c_1 - c_mu) * cov + c_1 * (p_c * p_c.transpose() + delta * cov) + c_mu * rank_mu;
    cov = 0.5 * (cov + cov.transpose()).eval();

    const double next_sigma = sigma * std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));
    if (std::isfinite(next_sigma) && next_sigma > 0.0) sigma = std::clamp(next_sigma, 1e-200, 1e200);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() == Eigen::Success) {
      Eigen::VectorXd ev = eig.eigenvalues();
      const double floor = std::max(ev.maxCoeff(), 1e-300) * 1e-20;
      for (int i = 0; i < n; ++i) ev(i) = std::max(ev(i), floor);
      basis = eig.eigenvectors();
      scales = ev.cwiseSqrt();
    }
    if (settings.on_generation) settings.on_generation(cov, sigma);
  }

  result.best_error = problem.best_error();
  result.evals_used = problem.used();
  result.trajectory = problem.trajectory();
  return result;
}

}  // namespace bbsel
