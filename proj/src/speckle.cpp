#include "camix/speckle.hpp"

#include <cmath>
#include <random>

#include "camix/errors.hpp"

namespace camix {

SyntheticScene default_scene(std::size_t height, std::size_t width,
                             double change_gain, std::uint32_t looks,
                             std::uint64_t seed) {
  SyntheticScene s;
  s.height = height;
  s.width = width;
  s.change_gain = change_gain;
  s.looks = looks;
  s.seed = seed;
  s.base_reflectivity.resize(height * width);
  s.change_mask.assign(height * width, 0);

  // Smooth reflectivity ramp so the scene is not trivially flat.
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      s.base_reflectivity[y * width + x] =
          80.0 + 40.0 * (static_cast<double>(x + y) /
                         static_cast<double>(height + width));

  auto fill_rect = [&](double y0, double x0, double y1, double x1) {
    for (std::size_t y = static_cast<std::size_t>(y0 * height);
         y < static_cast<std::size_t>(y1 * height); ++y)
      for (std::size_t x = static_cast<std::size_t>(x0 * width);
           x < static_cast<std::size_t>(x1 * width); ++x)
        s.change_mask[y * width + x] = 1;
  };
  // Two rectangles and one ellipse, together ~11% of the pixels.
  fill_rect(0.10, 0.12, 0.28, 0.32);
  fill_rect(0.62, 0.66, 0.80, 0.92);
  const double cy = 0.45 * height, cx = 0.50 * width;
  const double ry = 0.11 * height, rx = 0.14 * width;
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double dy = (y - cy) / ry, dx = (x - cx) / rx;
      if (dy * dy + dx * dx <= 1.0) s.change_mask[y * width + x] = 1;
    }
  return s;
}

std::vector<double> speckle_field(std::size_t count, std::uint32_t looks,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Shape L, scale 1/L: mean 1, variance 1/L.
  std::gamma_distribution<double> gamma(static_cast<double>(looks),
                                        1.0 / static_cast<double>(looks));
  std::vector<double> s(count);
  for (double& v : s) v = gamma(rng);
  return s;
}

GeneratedPair generate(const SyntheticScene& scene) {
  const std::size_t n = scene.height * scene.width;
  if (scene.base_reflectivity.size() != n || scene.change_mask.size() != n)
    throw DataError("generate: scene buffers do not match extent");
  if (scene.looks < 1) throw DataError("generate: looks must be >= 1");
  for (double v : scene.base_reflectivity)
    if (!(v > 0.0))
      throw DataError("generate: base reflectivity must be strictly positive");

  const auto s1 = speckle_field(n, scene.looks, scene.seed);
  const auto s2 = speckle_field(n, scene.looks, scene.seed ^ 0x9e3779b97f4a7c15ULL);

  GeneratedPair out;
  out.pair.height = scene.height;
  out.pair.width = scene.width;
  out.pair.t1.resize(n);
  out.pair.t2.resize(n);
  out.truth = scene.change_mask;
  for (std::size_t i = 0; i < n; ++i) {
    const double base = scene.base_reflectivity[i];
    out.pair.t1[i] = base * s1[i];
    out.pair.t2[i] =
        (scene.change_mask[i] ? base * scene.change_gain : base) * s2[i];
  }
  return out;
}

}  // namespace camix
