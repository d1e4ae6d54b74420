#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bbsel {

struct FunctionClass {
  int id;
  std::string name;
  bool separable;  // separable classes keep the identity rotation
};

/// The benchmark suite in id order; ids are contiguous from 1.
const std::vector<FunctionClass>& suite_list();
const FunctionClass& function_class(int id);

struct Bounds {
  double lower = -5.0;
  double upper = 5.0;
  double width() const { return upper - lower; }
  bool contains(double v) const { return v >= lower && v <= upper; }
};

/// Text record identifying an instance. Shift, rotation, and offset are
/// always re-derived from the seed and never serialized.
struct InstanceDescriptor {
  int class_id = 0;
  int dim = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const InstanceDescriptor&, const InstanceDescriptor&) = default;
};

/// "class_id dim seed"
std::string format_descriptor(const InstanceDescriptor& d);
InstanceDescriptor parse_descriptor(const std::string& text);

struct Fitness {
  double value;
  double error;  // value - f_opt
};

using RotationMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Q factor of a seeded Gaussian matrix, columns sign-corrected so that the
/// R factor has a positive diagonal.
RotationMatrix random_rotation(int dim, std::uint64_t seed);

/// A shifted, rotated, offset instance of a suite class:
///   f(x) = g(R (x - x_opt)) + f_opt
/// Immutable after construction and safe to evaluate concurrently.
class ProblemInstance {
 public:
  ProblemInstance(InstanceDescriptor descriptor, std::vector<double> x_opt, RotationMatrix rotation,
                  double f_opt, Bounds bounds);

  double evaluate(std::span<const double> x) const;
  Fitness fitness(std::span<const double> x) const;

  /// Base formula g evaluated in the transformed frame.
  double base(std::span<const double> z) const;

  /// Copy of this instance with a different rotation.
  ProblemInstance with_rotation(RotationMatrix rotation) const;

  const InstanceDescriptor& descriptor() const { return descriptor_; }
  int class_id() const { return descriptor_.class_id; }
  int dim() const { return descriptor_.dim; }
  std::uint64_t seed() const { return descriptor_.seed; }
  const std::vector<double>& x_opt() const { return x_opt_; }
  const RotationMatrix& rotation() const { return rotation_; }
  double f_opt() const { return f_opt_; }
  const Bounds& bounds() const { return bounds_; }

 private:
  InstanceDescriptor descriptor_;
  std::vector<double> x_opt_;
  RotationMatrix rotation_;
  bool identity_;
  double f_opt_;
  Bounds bounds_;
};

/// x_opt ~ U[-4, 4]^D (shrunk proportionally for other bounds),
/// f_opt ~ U[-100, 100], rotation random unless the class is separable.
ProblemInstance make_instance(int class_id, int dim, std::uint64_t seed, Bounds bounds = {});
inline ProblemInstance make_instance(const InstanceDescriptor& d, Bounds bounds = {}) {
  return make_instance(d.class_id, d.dim, d.seed, bounds);
}

}  // namespace bbsel
