#include "bbsel/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bbsel/common.hpp"
#include "bbsel/io.hpp"
#include "bbsel/rng.hpp"

namespace bbsel {

std::string to_string(SampleMode mode) { return mode == SampleMode::Grid ? "grid" : "random"; }

SampleMode parse_sample_mode(const std::string& text) {
  if (text == "grid") return SampleMode::Grid;
  if (text == "random") return SampleMode::Random;
  fail(ErrorKind::Format, "unknown sample mode '" + text + "'");
}

SampleMode default_sample_mode(int dim) { return dim == 2 ? SampleMode::Grid : SampleMode::Random; }

int exact_square_root(std::size_t n) {
  auto s = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  while (s * s > n) --s;
  while ((s + 1) * (s + 1) <= n) ++s;
  return s * s == n ? static_cast<int>(s) : 0;
}

int SampleMatrix::side() const { return exact_square_root(count); }

std::uint64_t SampleMatrix::hash() const {
  io::ByteWriter w;
  w.put<std::uint64_t>(count);
  w.put<std::int32_t>(dim);
  const std::string& head = w.str();
  std::uint64_t h = fnv1a64(std::as_bytes(std::span(head.data(), head.size())));
  return fnv1a64(std::as_bytes(std::span(coords)), h);
}

namespace {
// k such that k^dim == count, or 0.
std::size_t lattice_side(std::size_t count, int dim) {
  const auto k = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(count), 1.0 / dim)));
  for (std::size_t cand = (k > 0 ? k - 1 : 0); cand <= k + 1; ++cand) {
    std::size_t p = 1;
    for (int d = 0; d < dim && p <= count; ++d) p *= cand;
    if (p == count) return cand;
  }
  return 0;
}
}  // namespace

SampleMatrix make_sample_matrix(std::size_t count, int dim, Bounds bounds, SampleMode mode, std::uint64_t seed) {
  require(dim >= 1, "invalid dimension " + std::to_string(dim));
  require(bounds.upper > bounds.lower, "empty bounds");
  const int s = exact_square_root(count);
  if (s < 2) fail(ErrorKind::InvalidArgument, "sample count " + std::to_string(count) + " is not a perfect square >= 4");

  SampleMatrix m;
  m.count = count;
  m.dim = dim;
  m.mode = mode;
  m.seed = seed;
  m.bounds = bounds;
  m.coords.resize(count * static_cast<std::size_t>(dim));

  if (mode == SampleMode::Grid) {
    const std::size_t k = lattice_side(count, dim);
    if (k < 2)
      fail(ErrorKind::InvalidArgument,
           "grid sampling needs N = k^D; N = " + std::to_string(count) + ", D = " + std::to_string(dim));
    const double step = bounds.width() / static_cast<double>(k - 1);
    for (std::size_t i = 0; i < count; ++i) {
      // Axis 0 varies slowest.
      std::size_t rest = i;
      for (int d = dim - 1; d >= 0; --d) {
        const std::size_t j = rest % k;
        rest /= k;
        m.coords[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)] =
            j + 1 == k ? bounds.upper : bounds.lower + step * static_cast<double>(j);
      }
    }
  } else {
    Rng rng(seed);
    for (double& v : m.coords) v = rng.uniform(bounds.lower, bounds.upper);
  }
  return m;
}

FitnessVector fitness_vector(const ProblemInstance& instance, const SampleMatrix& samples) {
  if (samples.dim != instance.dim())
    fail(ErrorKind::InvalidArgument, "dimension mismatch: samples have D = " + std::to_string(samples.dim) +
                                         ", instance has D = " + std::to_string(instance.dim()));
  FitnessVector fv;
  fv.instance = instance.descriptor();
  fv.values.resize(samples.count);
  for (std::size_t i = 0; i < samples.count; ++i) fv.values[i] = instance.evaluate(samples.row(i));
  return fv;
}

FitnessVector fitness_vector(int dim, const Objective& objective, const SampleMatrix& samples) {
  if (samples.dim != dim) fail(ErrorKind::InvalidArgument, "dimension mismatch between objective and samples");
  FitnessVector fv;
  fv.values.resize(samples.count);
  for (std::size_t i = 0; i < samples.count; ++i) fv.values[i] = objective(samples.row(i));
  return fv;
}

std::vector<float> normalize(std::span<const double> fitness) {
  require(!fitness.empty(), "cannot normalize an empty fitness vector");
  for (double v : fitness)
    if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "non-finite fitness value in normalization");
  const auto [lo_it, hi_it] = std::minmax_element(fitness.begin(), fitness.end());
  double lo = *lo_it;
  double hi = *hi_it;
  std::vector<float> out(fitness.size(), 0.0f);
  if (hi == lo) return out;
  // Halve everything if the range overflows; the quotient is unchanged.
  double scale = 1.0;
  if (!std::isfinite(hi - lo)) {
    scale = 0.5;
    lo *= scale;
    hi *= scale;
  }
  const double range = hi - lo;
  for (std::size_t i = 0; i < fitness.size(); ++i)
    out[i] = static_cast<float>((fitness[i] * scale - lo) / range);
  return out;
}

LandscapeImage to_image(std::span<const float> normalized) {
  const int s = exact_square_root(normalized.size());
  if (s < 1) fail(ErrorKind::InvalidArgument, "vector length " + std::to_string(normalized.size()) + " is not a perfect square");
  return {s, std::vector<float>(normalized.begin(), normalized.end())};
}

LandscapeImage resize_image(const LandscapeImage& image, int target_side) {
  if (target_side < 2) fail(ErrorKind::InvalidArgument, "target side must be >= 2");
  if (image.side < 2) fail(ErrorKind::InvalidArgument, "source side must be >= 2");
  if (target_side == image.side) return image;

  struct Tap {
    int i0, i1;
    double t;
  };
  const double ratio = static_cast<double>(image.side) / target_side;
  std::vector<Tap> taps(static_cast<std::size_t>(target_side));
  for (int d = 0; d < target_side; ++d) {
    const double src = std::clamp((d + 0.5) * ratio - 0.5, 0.0, static_cast<double>(image.side - 1));
    const int i0 = static_cast<int>(std::floor(src));
    taps[static_cast<std::size_t>(d)] = {i0, std::min(i0 + 1, image.side - 1), src - i0};
  }
  LandscapeImage out{target_side, std::vector<float>(static_cast<std::size_t>(target_side * target_side))};
  for (int r = 0; r < target_side; ++r) {
    const Tap& ty = taps[static_cast<std::size_t>(r)];
    for (int c = 0; c < target_side; ++c) {
      const Tap& tx = taps[static_cast<std::size_t>(c)];
      const double top = image.at(ty.i0, tx.i0) * (1.0 - tx.t) + image.at(ty.i0, tx.i1) * tx.t;
      const double bottom = image.at(ty.i1, tx.i0) * (1.0 - tx.t) + image.at(ty.i1, tx.i1) * tx.t;
      const double v = top * (1.0 - ty.t) + bottom * ty.t;
      out.pixels[static_cast<std::size_t>(r * target_side + c)] = std::clamp(static_cast<float>(v), 0.0f, 1.0f);
    }
  }
  return out;
}

LandscapeImage make_landscape_image(const ProblemInstance& instance, const SampleMatrix& samples) {
  const FitnessVector fv = fitness_vector(instance, samples);
  const std::vector<float> norm = normalize(fv.values);
  return to_image(norm);
}

std::string encode_image(const LandscapeImage& image) {
  require(image.side >= 1 && image.side <= 0xffff, "image side out of range");
  require(image.pixels.size() == static_cast<std::size_t>(image.side) * image.side, "pixel count does not match side");
  io::ByteWriter w;
  w.put_bytes("LSIM");
  w.put<std::uint16_t>(kImageFormatVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(image.side));
  for (float p : image.pixels) w.put<float>(p);
  return w.take();
}

LandscapeImage decode_image(std::string_view bytes) {
  io::ByteReader r(bytes, "image");
  if (r.get_bytes(4) != "LSIM") fail(ErrorKind::Format, "image: bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kImageFormatVersion) fail(ErrorKind::Format, "image: unsupported version " + std::to_string(version));
  LandscapeImage img;
  img.side = r.get<std::uint16_t>();
  img.pixels.resize(static_cast<std::size_t>(img.side) * img.side);
  for (float& p : img.pixels) p = r.get<float>();
  r.expect_end();
  return img;
}

void write_image(const std::filesystem::path& path, const LandscapeImage& image) {
  io::write_file_atomic(path, encode_image(image));
}

LandscapeImage read_image(const std::filesystem::path& path) {
  try {
    return decode_image(io::read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) fail(ErrorKind::Format, path.string() + ": " + e.what());
    throw;
  }
}

}  // namespace bbsel
