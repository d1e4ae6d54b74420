#include "bbsel/problems.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bbsel/common.hpp"
#include "bbsel/rng.hpp"

namespace bbsel {

namespace {

enum Class : int {
  kSphere = 1,
  kEllipsoidSeparable,
  kRastriginSeparable,
  kRosenbrock,
  kEllipsoid,
  kRastrigin,
  kAckley,
  kGriewank,
  kSchwefel,
  kWeierstrass,
  kSchafferF7,
  kDifferentPowers,
  kBentCigar,
  kDiscus,
};

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Exponent of coordinate i in [0, 1], stretched across the dimensions.
double ramp(std::size_t i, std::size_t n) {
  return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
}

double sphere(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += v * v;
  return s;
}

double ellipsoid(std::span<const double> z) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += std::pow(1e6, ramp(i, z.size())) * z[i] * z[i];
  return s;
}

double rastrigin(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += v * v + 10.0 * (1.0 - std::cos(kTwoPi * v));
  return s;
}

// Shifted so that the minimum sits at z = 0.
double rosenbrock(std::span<const double> z) {
  if (z.size() == 1) return z[0] * z[0];
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < z.size(); ++i) {
    const double a = z[i] + 1.0;
    const double b = z[i + 1] + 1.0;
    const double t = a * a - b;
    s += 100.0 * t * t + z[i] * z[i];
  }
  return s;
}

double ackley(std::span<const double> z) {
  static const double kE = std::exp(1.0);
  const double n = static_cast<double>(z.size());
  double sq = 0.0;
  double cs = 0.0;
  for (double v : z) {
    sq += v * v;
    cs += std::cos(kTwoPi * v);
  }
  const double radial = 20.0 * (1.0 - std::exp(-0.2 * std::sqrt(sq / n)));
  const double periodic = std::max(0.0, kE - std::exp(cs / n));
  return radial + periodic;
}

double griewank(std::span<const double> z) {
  double sq = 0.0;
  double prod = 1.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double y = 10.0 * z[i];
    sq += y * y / 4000.0;
    prod *= std::cos(y / std::sqrt(static_cast<double>(i + 1)));
  }
  return sq + (1.0 - prod);
}

// t * sin(sqrt|t|) on [-500, 500] with the usual folded penalty outside.
double schwefel_term(double t, double n) {
  if (t > 500.0) {
    const double m = 500.0 - std::fmod(t, 500.0);
    return m * std::sin(std::sqrt(std::abs(m))) - (t - 500.0) * (t - 500.0) / (10000.0 * n);
  }
  if (t < -500.0) {
    const double m = std::fmod(std::abs(t), 500.0) - 500.0;
    return m * std::sin(std::sqrt(std::abs(m))) - (t + 500.0) * (t + 500.0) / (10000.0 * n);
  }
  return t * std::sin(std::sqrt(std::abs(t)));
}

// Maximizer of t * sin(sqrt t), refined by Newton on the derivative.
double schwefel_peak() {
  double t = 420.968746;
  for (int it = 0; it < 20; ++it) {
    const double r = std::sqrt(t);
    const double d1 = std::sin(r) + 0.5 * r * std::cos(r);
    const double d2 = 0.75 * std::cos(r) / r - 0.25 * std::sin(r);
    t -= d1 / d2;
  }
  return t;
}

double schwefel(std::span<const double> z) {
  static const double kPeak = schwefel_peak();
  static const double kPeakValue = kPeak * std::sin(std::sqrt(kPeak));
  const double n = static_cast<double>(z.size());
  double s = 0.0;
  for (double v : z) s += std::max(0.0, kPeakValue - schwefel_term(kPeak + 100.0 * v, n));
  return 0.01 * s;
}

double weierstrass(std::span<const double> z) {
  constexpr int kTerms = 12;
  double s = 0.0;
  for (double v : z) {
    double a = 1.0;
    double b = 1.0;
    for (int k = 0; k < kTerms; ++k) {
      // cos(pi * 3^k) = -1 for every k, so each term is non-negative.
      s += a * (1.0 + std::cos(kTwoPi * b * (v + 0.5)));
      a *= 0.5;
      b *= 3.0;
    }
  }
  return s;
}

double schaffer_f7(std::span<const double> z) {
  auto term = [](double s) {
    const double r = std::sqrt(s);
    const double w = std::sin(50.0 * std::pow(s, 0.2));
    return r + r * w * w;
  };
  if (z.size() == 1) {
    const double t = term(std::abs(z[0]));
    return t * t;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < z.size(); ++i) acc += term(std::sqrt(z[i] * z[i] + z[i + 1] * z[i + 1]));
  acc /= static_cast<double>(z.size() - 1);
  return acc * acc;
}

double different_powers(std::span<const double> z) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += std::pow(std::abs(z[i]), 2.0 + 4.0 * ramp(i, z.size()));
  return std::sqrt(s);
}

double bent_cigar(std::span<const double> z) {
  double s = z[0] * z[0];
  for (std::size_t i = 1; i < z.size(); ++i) s += 1e6 * z[i] * z[i];
  return s;
}

double discus(std::span<const double> z) {
  double s = 1e6 * z[0] * z[0];
  for (std::size_t i = 1; i < z.size(); ++i) s += z[i] * z[i];
  return s;
}

}  // namespace

const std::vector<FunctionClass>& suite_list() {
  static const std::vector<FunctionClass> suite = {
      {kSphere, "Sphere", true},
      {kEllipsoidSeparable, "EllipsoidSeparable", true},
      {kRastriginSeparable, "RastriginSeparable", true},
      {kRosenbrock, "Rosenbrock", false},
      {kEllipsoid, "Ellipsoid", false},
      {kRastrigin, "Rastrigin", false},
      {kAckley, "Ackley", false},
      {kGriewank, "Griewank", false},
      {kSchwefel, "Schwefel", false},
      {kWeierstrass, "Weierstrass", false},
      {kSchafferF7, "SchafferF7", false},
      {kDifferentPowers, "DifferentPowers", false},
      {kBentCigar, "BentCigar", false},
      {kDiscus, "Discus", false},
  };
  return suite;
}

const FunctionClass& function_class(int id) {
  const auto& suite = suite_list();
  if (id < 1 || id > static_cast<int>(suite.size()))
    fail(ErrorKind::InvalidArgument, "unknown function class id " + std::to_string(id));
  return suite[static_cast<std::size_t>(id - 1)];
}

std::string format_descriptor(const InstanceDescriptor& d) {
  return std::to_string(d.class_id) + " " + std::to_string(d.dim) + " " + std::to_string(d.seed);
}

InstanceDescriptor parse_descriptor(const std::string& text) {
  std::istringstream in(text);
  InstanceDescriptor d;
  if (!(in >> d.class_id >> d.dim >> d.seed)) fail(ErrorKind::Format, "malformed instance descriptor '" + text + "'");
  std::string rest;
  if (in >> rest) fail(ErrorKind::Format, "trailing fields in instance descriptor '" + text + "'");
  return d;
}

RotationMatrix random_rotation(int dim, std::uint64_t seed) {
  if (dim < 1) fail(ErrorKind::InvalidArgument, "invalid dimension " + std::to_string(dim));
  Rng rng(seed);
  Eigen::MatrixXd g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& packed = qr.matrixQR();
  for (int j = 0; j < dim; ++j)
    if (packed(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

ProblemInstance::ProblemInstance(InstanceDescriptor descriptor, std::vector<double> x_opt, RotationMatrix rotation,
                                 double f_opt, Bounds bounds)
    : descriptor_(descriptor),
      x_opt_(std::move(x_opt)),
      rotation_(std::move(rotation)),
      identity_(rotation_.isIdentity(0.0)),
      f_opt_(f_opt),
      bounds_(bounds) {
  function_class(descriptor_.class_id);
  require(descriptor_.dim >= 1, "invalid dimension " + std::to_string(descriptor_.dim));
  require(x_opt_.size() == static_cast<std::size_t>(descriptor_.dim), "x_opt has wrong length");
  require(rotation_.rows() == descriptor_.dim && rotation_.cols() == descriptor_.dim, "rotation has wrong shape");
}

double ProblemInstance::base(std::span<const double> z) const {
  switch (descriptor_.class_id) {
    case kSphere: return sphere(z);
    case kEllipsoidSeparable:
    case kEllipsoid: return ellipsoid(z);
    case kRastriginSeparable:
    case kRastrigin: return rastrigin(z);
    case kRosenbrock: return rosenbrock(z);
    case kAckley: return ackley(z);
    case kGriewank: return griewank(z);
    case kSchwefel: return schwefel(z);
    case kWeierstrass: return weierstrass(z);
    case kSchafferF7: return schaffer_f7(z);
    case kDifferentPowers: return different_powers(z);
    case kBentCigar: return bent_cigar(z);
    case kDiscus: return discus(z);
  }
  fail(ErrorKind::InvalidArgument, "unknown function class id " + std::to_string(descriptor_.class_id));
}

double ProblemInstance::evaluate(std::span<const double> x) const {
  const auto n = static_cast<std::size_t>(descriptor_.dim);
  if (x.size() != n)
    fail(ErrorKind::InvalidArgument,
         "dimension mismatch: expected " + std::to_string(n) + ", got " + std::to_string(x.size()));
  constexpr std::size_t kStack = 64;
  std::array<double, kStack> diff_stack;
  std::array<double, kStack> z_stack;
  std::vector<double> diff_heap;
  std::vector<double> z_heap;
  double* diff = diff_stack.data();
  double* z = z_stack.data();
  if (n > kStack) {
    diff_heap.resize(n);
    z_heap.resize(n);
    diff = diff_heap.data();
    z = z_heap.data();
  }
  for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - x_opt_[i];
  if (identity_) {
    std::copy(diff, diff + n, z);
  } else {
    const double* r = rotation_.data();
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += r[i * n + j] * diff[j];
      z[i] = s;
    }
  }
  return base(std::span<const double>(z, n)) + f_opt_;
}

Fitness ProblemInstance::fitness(std::span<const double> x) const {
  const double v = evaluate(x);
  return {v, v - f_opt_};
}

ProblemInstance ProblemInstance::with_rotation(RotationMatrix rotation) const {
  return ProblemInstance(descriptor_, x_opt_, std::move(rotation), f_opt_, bounds_);
}

ProblemInstance make_instance(int class_id, int dim, std::uint64_t seed, Bounds bounds) {
  const FunctionClass& fc = function_class(class_id);
  if (dim < 1) fail(ErrorKind::InvalidArgument, "invalid dimension " + std::to_string(dim));
  require(bounds.upper > bounds.lower, "empty bounds");
  const auto tag_class = static_cast<std::uint64_t>(class_id);
  const auto tag_dim = static_cast<std::uint64_t>(dim);
  Rng rng(derive_seed(seed, {tag_class, tag_dim, 1}));

  const double center = 0.5 * (bounds.lower + bounds.upper);
  const double half = 0.4 * bounds.width();  // [-4, 4] inside [-5, 5]
  std::vector<double> x_opt(static_cast<std::size_t>(dim));
  for (double& v : x_opt) v = rng.uniform(center - half, center + half);
  const double f_opt = rng.uniform(-100.0, 100.0);

  RotationMatrix rotation = fc.separable ? RotationMatrix::Identity(dim, dim)
                                         : random_rotation(dim, derive_seed(seed, {tag_class, tag_dim, 2}));
  return ProblemInstance({class_id, dim, seed}, std::move(x_opt), std::move(rotation), f_opt, bounds);
}

}  // namespace bbsel
