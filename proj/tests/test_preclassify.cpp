#include <doctest.h>

#include <cmath>
#include <random>

#include "camix/errors.hpp"
#include "camix/preclassify.hpp"
#include "camix/speckle.hpp"

using namespace camix;

namespace {

ImagePair constant_pair(std::size_t h, std::size_t w, double v1, double v2) {
  ImagePair p;
  p.height = h;
  p.width = w;
  p.t1.assign(h * w, v1);
  p.t2.assign(h * w, v2);
  return p;
}

}  // namespace

TEST_CASE("log_ratio of identical images is all zeros") {
  ImagePair p = constant_pair(4, 4, 10.0, 10.0);
  const DifferenceImage di = log_ratio(p);
  for (double v : di.values) CHECK(v == 0.0);
}

TEST_CASE("log_ratio analytic pixel value") {
  ImagePair p = constant_pair(2, 2, 0.0, 0.0);
  p.t2[3] = std::exp(1.0) - 1.0;  // raw log-ratio exactly 1 at that pixel
  const DifferenceImage di = log_ratio(p);
  CHECK(di.raw_max == doctest::Approx(1.0));
  CHECK(di.values[3] == doctest::Approx(1.0));
  CHECK(di.values[0] == doctest::Approx(0.0));
}

TEST_CASE("log_ratio is symmetric in its inputs") {
  std::mt19937_64 rng(5);
  ImagePair p = constant_pair(8, 8, 0, 0);
  std::uniform_real_distribution<double> d(0.0, 50.0);
  for (auto& v : p.t1) v = d(rng);
  for (auto& v : p.t2) v = d(rng);
  ImagePair q = p;
  std::swap(q.t1, q.t2);
  const DifferenceImage a = log_ratio(p), b = log_ratio(q);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
}

TEST_CASE("log_ratio rejects extent mismatch") {
  ImagePair p = constant_pair(4, 4, 1, 1);
  p.t2.pop_back();
  CHECK_THROWS_AS(log_ratio(p), DataError);
}

TEST_CASE("fcm: point exactly at a centroid gets membership 1") {
  // Quantile init places centroids on data values; one update step must
  // apply the singularity rule to those points.
  std::vector<double> values{0.0, 0.3, 0.5, 0.8, 1.0};
  const FcmResult r = fcm(values, 2, 2.0, 1e-5, 1);
  bool saw_exact = false;
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t k = 0; k < 2; ++k)
      if (values[i] == r.centroids[k]) {
        saw_exact = true;
        CHECK(r.memberships[i * 2 + k] == 1.0);
      }
  CHECK(saw_exact);
}

TEST_CASE("fcm separates two tight blobs") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  std::vector<double> values;
  for (int i = 0; i < 50; ++i) values.push_back(0.0 + jitter(rng));
  for (int i = 0; i < 50; ++i) values.push_back(1.0 + jitter(rng));
  const FcmResult r = fcm(values, 2);
  const double lo = std::min(r.centroids[0], r.centroids[1]);
  const double hi = std::max(r.centroids[0], r.centroids[1]);
  CHECK(std::abs(lo - 0.0) < 0.02);
  CHECK(std::abs(hi - 1.0) < 0.02);
}

TEST_CASE("fcm objective is monotonically non-increasing over 100 seeded runs") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    std::vector<double> values(200);
    for (auto& v : values) v = d(rng);
    const FcmResult r = fcm(values, 3 + seed % 3);
    REQUIRE(!r.objective.empty());
    for (std::size_t i = 1; i < r.objective.size(); ++i)
      CHECK(r.objective[i] <= r.objective[i - 1] + 1e-12);
  }
}

TEST_CASE("fcm memberships sum to one per point") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<double> values(300);
  for (auto& v : values) v = d(rng);
  const FcmResult r = fcm(values, 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) s += r.memberships[i * 4 + k];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("fcm flags degenerate all-identical input") {
  std::vector<double> values(50, 0.25);
  const FcmResult r = fcm(values, 3);
  CHECK(r.degenerate);
}

TEST_CASE("hierarchical_fcm on a zero difference image is all unchanged") {
  DifferenceImage di;
  di.height = di.width = 8;
  di.values.assign(64, 0.0);
  const PreclassLabels l = hierarchical_fcm(di);
  CHECK(l.degenerate);
  for (PixelClass c : l.labels) CHECK(c == PixelClass::Unchanged);
}

TEST_CASE("hierarchical_fcm classes partition the image and memberships sum to 1") {
  const GeneratedPair g = generate(default_scene(64, 64));
  const DifferenceImage di = log_ratio(g.pair);
  const PreclassLabels l = hierarchical_fcm(di);
  std::size_t counts[3] = {0, 0, 0};
  for (PixelClass c : l.labels) ++counts[static_cast<std::size_t>(c)];
  CHECK(counts[0] + counts[1] + counts[2] == 64 * 64);
  CHECK(counts[1] > 0);  // some changed pixels found
  for (std::size_t i = 0; i < l.labels.size(); ++i) {
    const double s = l.memberships[i * 3] + l.memberships[i * 3 + 1] +
                     l.memberships[i * 3 + 2];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("hierarchical_fcm changed labels are mostly inside the true mask") {
  const GeneratedPair g = generate(default_scene());
  const DifferenceImage di = log_ratio(g.pair);
  const PreclassLabels l = hierarchical_fcm(di);
  std::size_t changed = 0, inside = 0;
  for (std::size_t i = 0; i < l.labels.size(); ++i) {
    if (l.labels[i] == PixelClass::Changed) {
      ++changed;
      inside += g.truth[i];
    }
  }
  REQUIRE(changed > 0);
  CHECK(double(inside) / double(changed) >= 0.90);
}

TEST_CASE("mine_samples balances classes and is deterministic") {
  const GeneratedPair g = generate(default_scene(64, 64));
  const DifferenceImage di = log_ratio(g.pair);
  const PreclassLabels l = hierarchical_fcm(di);
  const SampleSet a = mine_samples(g.pair, di, l, 3, 50, 123);
  const SampleSet b = mine_samples(g.pair, di, l, 3, 50, 123);
  REQUIRE(a.samples.size() == b.samples.size());
  std::size_t changed = 0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].cy == b.samples[i].cy);
    CHECK(a.samples[i].patch == b.samples[i].patch);
    changed += a.samples[i].label;
  }
  CHECK(changed * 2 == a.samples.size());  // exact balance
}

TEST_CASE("mine_samples caps per class") {
  const GeneratedPair g = generate(default_scene());
  const DifferenceImage di = log_ratio(g.pair);
  const PreclassLabels l = hierarchical_fcm(di);
  const SampleSet s = mine_samples(g.pair, di, l, 3, 100, 1);
  CHECK(s.samples.size() == 200);
}

TEST_CASE("mine_samples errors when a class is empty") {
  const GeneratedPair g = generate(default_scene(32, 32));
  const DifferenceImage di = log_ratio(g.pair);
  PreclassLabels l;
  l.height = l.width = 32;
  l.labels.assign(32 * 32, PixelClass::Intermediate);
  l.memberships.assign(32 * 32 * 3, 0.0);
  CHECK_THROWS_AS(mine_samples(g.pair, di, l, 3, 10, 1), DataError);
}

TEST_CASE("patch center pixel carries the mined label channelwise") {
  const GeneratedPair g = generate(default_scene(64, 64));
  const DifferenceImage di = log_ratio(g.pair);
  const PreclassLabels l = hierarchical_fcm(di);
  const SampleSet s = mine_samples(g.pair, di, l, 2, 20, 3);
  const InputStack stack = build_input_stack(g.pair, di);
  const std::size_t side = 5;
  for (const Sample& sm : s.samples) {
    // center of the DI channel equals the stack value at the center pixel
    const double center = sm.patch[(2 * side + 2) * side + 2];
    CHECK(center ==
          stack.data[2 * 64 * 64 + sm.cy * 64 + sm.cx]);
    const PixelClass expect =
        sm.label ? PixelClass::Changed : PixelClass::Unchanged;
    CHECK(l.labels[sm.cy * 64 + sm.cx] == expect);
  }
}
