#include <doctest.h>

#include <cmath>

#include "camix/errors.hpp"
#include "camix/speckle.hpp"

using namespace camix;

TEST_CASE("speckle field has mean 1 and variance 1/L") {
  const std::size_t n = 1'000'000;
  for (std::uint32_t looks : {1u, 4u}) {
    const auto s = speckle_field(n, looks, 99);
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= n;
    CHECK(mean > 0.995);
    CHECK(mean < 1.005);
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    var /= n;
    CHECK(var == doctest::Approx(1.0 / looks).epsilon(0.01));
  }
}

TEST_CASE("generate is deterministic for a fixed seed") {
  const SyntheticScene scene = default_scene();
  const GeneratedPair a = generate(scene);
  const GeneratedPair b = generate(scene);
  CHECK(a.pair.t1 == b.pair.t1);
  CHECK(a.pair.t2 == b.pair.t2);
  CHECK(a.truth == b.truth);
}

TEST_CASE("huge look count collapses the speckle") {
  SyntheticScene scene = default_scene(64, 64);
  scene.looks = 1'000'000;
  const GeneratedPair g = generate(scene);
  double rms = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < g.pair.t1.size(); ++i) {
    const double d = g.pair.t1[i] - scene.base_reflectivity[i];
    rms += d * d;
    ref += scene.base_reflectivity[i] * scene.base_reflectivity[i];
  }
  CHECK(std::sqrt(rms / ref) < 0.01);
}

TEST_CASE("pixels outside the mask share expected intensity across epochs") {
  SyntheticScene scene = default_scene(96, 96);
  scene.looks = 1;  // worst case noise
  const GeneratedPair g = generate(scene);
  double s1 = 0.0, s2 = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.truth.size(); ++i) {
    if (g.truth[i]) continue;
    s1 += g.pair.t1[i];
    s2 += g.pair.t2[i];
    ++n;
  }
  CHECK(s1 / n == doctest::Approx(s2 / n).epsilon(0.05));
}

TEST_CASE("default scene change fraction is 8-15%") {
  const SyntheticScene scene = default_scene();
  std::size_t changed = 0;
  for (auto v : scene.change_mask) changed += v;
  const double frac = double(changed) / scene.change_mask.size();
  CHECK(frac >= 0.08);
  CHECK(frac <= 0.15);
}

TEST_CASE("non-positive reflectivity is rejected") {
  SyntheticScene scene = default_scene(8, 8);
  scene.base_reflectivity[5] = 0.0;
  CHECK_THROWS_AS(generate(scene), DataError);
}
