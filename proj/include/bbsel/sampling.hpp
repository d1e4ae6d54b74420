#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bbsel/problems.hpp"

namespace bbsel {

enum class SampleMode { Grid, Random };

std::string to_string(SampleMode mode);
SampleMode parse_sample_mode(const std::string& text);

/// Grid for D = 2 (a true raster), seeded uniform sampling otherwise.
SampleMode default_sample_mode(int dim);

/// N x D coordinates shared by every instance of a dataset. Row-major.
struct SampleMatrix {
  std::size_t count = 0;
  int dim = 0;
  SampleMode mode = SampleMode::Random;
  std::uint64_t seed = 0;
  Bounds bounds;
  std::vector<double> coords;

  std::span<const double> row(std::size_t i) const {
    return {coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  int side() const;
  /// FNV-1a over the coordinate bytes and shape.
  std::uint64_t hash() const;
};

/// Returns s when n = s * s, otherwise 0.
int exact_square_root(std::size_t n);

SampleMatrix make_sample_matrix(std::size_t count, int dim, Bounds bounds, SampleMode mode, std::uint64_t seed);

struct FitnessVector {
  std::vector<double> values;
  InstanceDescriptor instance;
};

using Objective = std::function<double(std::span<const double>)>;

FitnessVector fitness_vector(const ProblemInstance& instance, const SampleMatrix& samples);
FitnessVector fitness_vector(int dim, const Objective& objective, const SampleMatrix& samples);

/// Min-max normalization onto [0, 1]. A constant input maps to all zeros.
/// Arithmetic is carried out in double and rounded once to float.
std::vector<float> normalize(std::span<const double> fitness);

/// s x s grid of values in [0, 1], row-major.
struct LandscapeImage {
  int side = 0;
  std::vector<float> pixels;

  float at(int row, int col) const { return pixels[static_cast<std::size_t>(row * side + col)]; }
  friend bool operator==(const LandscapeImage&, const LandscapeImage&) = default;
};

/// Row-major reshape: pixel (r, c) = v[r*s + c].
LandscapeImage to_image(std::span<const float> normalized);

/// Bilinear resampling with pixel-center alignment.
LandscapeImage resize_image(const LandscapeImage& image, int target_side);

/// fitness_vector -> normalize -> to_image.
LandscapeImage make_landscape_image(const ProblemInstance& instance, const SampleMatrix& samples);

// Image file: "LSIM", u16 version, u16 side, side*side little-endian f32.
inline constexpr std::uint16_t kImageFormatVersion = 1;
std::string encode_image(const LandscapeImage& image);
LandscapeImage decode_image(std::string_view bytes);
void write_image(const std::filesystem::path& path, const LandscapeImage& image);
LandscapeImage read_image(const std::filesystem::path& path);

}  // namespace bbsel
