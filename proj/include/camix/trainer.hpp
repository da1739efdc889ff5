#pragma once

#include <cstdint>
#include <vector>

#include "camix/model.hpp"
#include "camix/preclassify.hpp"

namespace camix {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  ModelConfig model;
};

struct TrainResult {
  CAMixerModel model;
  std::vector<double> loss_history;  // per-epoch mean cross-entropy
};

// Seeded mini-batch SGD with momentum over a mined sample set.
// Deterministic for a fixed config; NaN loss raises NumericError.
TrainResult train(const SampleSet& samples, const TrainConfig& cfg,
                  FeatureSink* sink = nullptr);

struct ChangeMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> map;  // {0,1}
};

// Classifies every pixel from the same 3-channel patch construction as
// mine_samples. Output is independent of tile_size.
ChangeMap predict_map(const CAMixerModel& model, const ImagePair& pair,
                      std::size_t tile_size = 64, FeatureSink* sink = nullptr);

}  // namespace camix
