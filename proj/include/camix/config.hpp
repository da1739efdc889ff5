#pragma once

#include <cstdint>
#include <string>

#include "camix/model.hpp"

namespace camix {

// Full pipeline configuration, flat key=value on disk. Unknown keys are
// rejected so a typo cannot silently fall back to a default.
struct RunConfig {
  // scene
  std::size_t height = 128;
  std::size_t width = 128;
  std::uint32_t looks = 4;
  double change_gain = 3.0;
  std::uint64_t seed = 7;
  // preclassification
  std::size_t coarse_clusters = 5;
  std::size_t patch_radius = 3;
  std::size_t sample_cap = 200;
  // training
  // 10 epochs at 1e-3: longer schedules overfit the pseudo-labels and
  // higher rates diverge at the default model size.
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  double momentum = 0.9;
  std::size_t channels = 30;
  std::size_t blocks = 3;
  std::size_t beta = 2;
  std::string variant = "full";
  // inference
  std::size_t tile_size = 64;

  ModelConfig model_config() const;

  // One key=value per line, keys in a fixed order.
  std::string to_text() const;
  void set(const std::string& key, const std::string& value);
  // FNV-1a of the resolved text, hex.
  std::string hash() const;
};

RunConfig load_run_config(const std::string& path, RunConfig base = {});
void apply_config_line(RunConfig& cfg, const std::string& line);

}  // namespace camix
