#include <doctest.h>

#include <cmath>
#include <random>

#include "camix/errors.hpp"
#include "camix/trainer.hpp"

using namespace camix;

namespace {

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01;
  cfg.seed = 5;
  cfg.model.channels = 10;
  cfg.model.blocks = 1;
  cfg.model.beta = 1;
  cfg.model.patch_radius = 1;  // 3x3 patches
  return cfg;
}

// Linearly separable toy set: class 1 patches bright, class 0 dark.
SampleSet toy_samples(std::size_t per_class, std::uint64_t seed) {
  SampleSet set;
  set.patch_radius = 1;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-0.05, 0.05);
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    Sample s;
    s.label = i < per_class ? 0 : 1;
    s.cy = i;
    s.cx = 0;
    const double level = s.label ? 0.9 : 0.1;
    s.patch.resize(3 * 9);
    for (double& v : s.patch) v = level + noise(rng);
    set.samples.push_back(std::move(s));
  }
  return set;
}

}  // namespace

TEST_CASE("loss on a separable toy set drops below 0.1 within 50 epochs") {
  const TrainResult r = train(toy_samples(20, 1), toy_config());
  CHECK(r.loss_history.size() == 50);
  for (double l : r.loss_history) CHECK(std::isfinite(l));
  CHECK(r.loss_history.back() < 0.1);
}

TEST_CASE("a single sample is memorized") {
  SampleSet set = toy_samples(1, 2);
  set.samples.resize(1);  // one unchanged sample
  TrainConfig cfg = toy_config();
  cfg.epochs = 30;
  cfg.batch_size = 1;
  const TrainResult r = train(set, cfg);
  const std::size_t side = 3;
  Tensor batch(std::vector<double>(set.samples[0].patch), {1, 3, side, side});
  const auto logits = forward(r.model, batch).data();
  CHECK(logits[0] > logits[1]);  // class 0 wins
}

TEST_CASE("training is bit-reproducible under a fixed seed") {
  const SampleSet set = toy_samples(10, 3);
  TrainConfig cfg = toy_config();
  cfg.epochs = 5;
  const TrainResult a = train(set, cfg);
  const TrainResult b = train(set, cfg);
  CHECK(a.loss_history == b.loss_history);
  const auto pa = a.model.parameters(), pb = b.model.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i].data() == pb[i].data());
}

TEST_CASE("two seeds give different parameters but both converge") {
  const SampleSet set = toy_samples(20, 4);
  TrainConfig c1 = toy_config(), c2 = toy_config();
  c2.seed = 6;
  const TrainResult a = train(set, c1);
  const TrainResult b = train(set, c2);
  CHECK(a.model.head_w.data() != b.model.head_w.data());
  CHECK(a.loss_history.back() < 0.1);
  CHECK(b.loss_history.back() < 0.1);
}

TEST_CASE("exploding learning rate aborts with a NaN diagnostic") {
  TrainConfig cfg = toy_config();
  cfg.learning_rate = 1e6;
  cfg.epochs = 20;
  CHECK_THROWS_AS(train(toy_samples(20, 7), cfg), NumericError);
}

TEST_CASE("empty sample set is rejected") {
  CHECK_THROWS_AS(train(SampleSet{}, toy_config()), DataError);
}

TEST_CASE("predict_map is invariant to tile size and matches extents") {
  TrainConfig cfg = toy_config();
  cfg.epochs = 2;
  const TrainResult r = train(toy_samples(10, 8), cfg);

  SyntheticScene scene = default_scene(24, 20);
  const GeneratedPair g = generate(scene);
  const ChangeMap one = predict_map(r.model, g.pair, 1);
  const ChangeMap big = predict_map(r.model, g.pair, 64);
  CHECK(one.height == 24);
  CHECK(one.width == 20);
  CHECK(one.map == big.map);
}

TEST_CASE("a head biased toward class 0 yields an all-unchanged map") {
  TrainConfig cfg = toy_config();
  cfg.epochs = 1;
  const TrainResult r = train(toy_samples(5, 9), cfg);
  CAMixerModel m = r.model;
  m.head_b.data()[0] = 1e9;
  const GeneratedPair g = generate(default_scene(16, 16));
  const ChangeMap map = predict_map(m, g.pair);
  for (auto v : map.map) CHECK(v == 0);
}
