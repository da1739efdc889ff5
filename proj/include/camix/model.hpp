#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "camix/tensor.hpp"

namespace camix {

enum class Variant { Full, NoPcam, NoGffn, Basic, FcmPrecls };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct ModelConfig {
  std::size_t channels = 30;      // C; divisible by 5 and by 2
  std::size_t blocks = 3;         // N mixing blocks
  std::size_t beta = 2;           // shift-conv expansion ratio
  std::size_t patch_radius = 3;   // input patches are (2r+1) x (2r+1)
  std::size_t in_channels = 3;    // I1, I2, DI
  Variant variant = Variant::Full;
  std::uint64_t init_seed = 1;

  std::size_t patch_side() const { return 2 * patch_radius + 1; }
  bool use_pcam() const {
    return variant != Variant::NoPcam && variant != Variant::Basic;
  }
  bool use_gffn() const {
    return variant != Variant::NoGffn && variant != Variant::Basic;
  }
  // Basic keeps the stem/head but no mixing blocks.
  std::size_t effective_blocks() const {
    return variant == Variant::Basic ? 0 : blocks;
  }
};

struct ShiftConvParams {
  Tensor w1;  // [beta*C, C, 1, 1]
  Tensor w2;  // [C, beta*C, 1, 1]
};

struct AttentionParams {
  Tensor wq;  // [token_dim, d]
  Tensor wk;
  Tensor wv;  // [token_dim, token_dim] so tokens reconstruct to patches
};

struct GffnParams {
  Tensor w1;   // [2C, C, 1, 1] gate path
  Tensor w2;   // [2C, C, 1, 1] value path
  Tensor wd3;  // [2C, 1, 3, 3] depth-wise
  Tensor wd5;  // [2C, 1, 5, 5] depth-wise
  Tensor w0;   // [C, 2C, 1, 1]
};

struct BlockParams {
  ShiftConvParams shift_conv;
  AttentionParams attention;
  GffnParams gffn;
  Tensor norm_gamma;  // [C]
  Tensor norm_beta;   // [C]
};

// Receives the flattened post-PCAM activations of every sample, per block.
class FeatureSink {
 public:
  virtual ~FeatureSink() = default;
  virtual void on_block_features(std::size_t block,
                                 const Tensor& features) = 0;
};

struct CAMixerModel {
  ModelConfig cfg;
  Tensor stem1, stem2, stem3;  // 3x3 convs: in->C, C->C, C->C
  std::vector<BlockParams> blocks;
  Tensor head_w;  // [C * side^2, 2]
  Tensor head_b;  // [2]

  std::vector<Tensor> parameters() const;
};

CAMixerModel init_model(const ModelConfig& cfg);

// Eq-style building blocks, exposed for direct testing.
Tensor shift_conv(const Tensor& x, const ShiftConvParams& p);
Tensor patch_attention(const Tensor& x, const AttentionParams& p);
Tensor pcam(const Tensor& x, const BlockParams& b);
Tensor gffn(const Tensor& x, const GffnParams& p);

Tensor forward(const CAMixerModel& model, const Tensor& batch,
               FeatureSink* sink = nullptr);

// "CAMX" container: version, JSON config block, parameters as LE f64.
void save_model(const CAMixerModel& model, std::ostream& out);
CAMixerModel load_model(std::istream& in);
void save_model_file(const CAMixerModel& model, const std::string& path);
CAMixerModel load_model_file(const std::string& path);

}  // namespace camix
