#include "camix/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "camix/errors.hpp"

namespace camix {

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::Full;
  if (s == "no_pcam") return Variant::NoPcam;
  if (s == "no_gffn") return Variant::NoGffn;
  if (s == "basic") return Variant::Basic;
  if (s == "fcm_precls") return Variant::FcmPrecls;
  throw DataError("unknown variant '" + s +
                  "' (expected full|no_pcam|no_gffn|basic|fcm_precls)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoPcam: return "no_pcam";
    case Variant::NoGffn: return "no_gffn";
    case Variant::Basic: return "basic";
    case Variant::FcmPrecls: return "fcm_precls";
  }
  return "full";
}

namespace {

constexpr std::size_t kAttnPatch = 3;

Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> d(shape_size(shape));
  for (double& v : d) v = dist(rng);
  return Tensor(std::move(d), std::move(shape), true);
}

void validate_config(const ModelConfig& cfg) {
  if (cfg.channels == 0 || cfg.channels % 2 != 0)
    throw DataError("model config: channels must be positive and even");
  if ((cfg.beta * cfg.channels) % 5 != 0)
    throw DataError("model config: beta*channels must be divisible by 5, got " +
                    std::to_string(cfg.beta * cfg.channels));
  if (cfg.beta == 0) throw DataError("model config: beta must be positive");
}

}  // namespace

std::vector<Tensor> CAMixerModel::parameters() const {
  std::vector<Tensor> ps{stem1, stem2, stem3};
  for (const BlockParams& b : blocks) {
    ps.push_back(b.shift_conv.w1);
    ps.push_back(b.shift_conv.w2);
    ps.push_back(b.attention.wq);
    ps.push_back(b.attention.wk);
    ps.push_back(b.attention.wv);
    ps.push_back(b.gffn.w1);
    ps.push_back(b.gffn.w2);
    ps.push_back(b.gffn.wd3);
    ps.push_back(b.gffn.wd5);
    ps.push_back(b.gffn.w0);
    ps.push_back(b.norm_gamma);
    ps.push_back(b.norm_beta);
  }
  ps.push_back(head_w);
  ps.push_back(head_b);
  return ps;
}

CAMixerModel init_model(const ModelConfig& cfg) {
  validate_config(cfg);
  std::mt19937_64 rng(cfg.init_seed);
  const std::size_t c = cfg.channels;
  const std::size_t side = cfg.patch_side();
  const std::size_t td = kAttnPatch * kAttnPatch * c;

  CAMixerModel m;
  m.cfg = cfg;
  m.stem1 = he_uniform({c, cfg.in_channels, 3, 3}, cfg.in_channels * 9, rng);
  m.stem2 = he_uniform({c, c, 3, 3}, c * 9, rng);
  m.stem3 = he_uniform({c, c, 3, 3}, c * 9, rng);
  for (std::size_t i = 0; i < cfg.effective_blocks(); ++i) {
    BlockParams b;
    b.shift_conv.w1 = he_uniform({cfg.beta * c, c, 1, 1}, c, rng);
    b.shift_conv.w2 = he_uniform({c, cfg.beta * c, 1, 1}, cfg.beta * c, rng);
    b.attention.wq = he_uniform({td, td}, td, rng);
    b.attention.wk = he_uniform({td, td}, td, rng);
    b.attention.wv = he_uniform({td, td}, td, rng);
    b.gffn.w1 = he_uniform({2 * c, c, 1, 1}, c, rng);
    b.gffn.w2 = he_uniform({2 * c, c, 1, 1}, c, rng);
    b.gffn.wd3 = he_uniform({2 * c, 1, 3, 3}, 9, rng);
    b.gffn.wd5 = he_uniform({2 * c, 1, 5, 5}, 25, rng);
    b.gffn.w0 = he_uniform({c, 2 * c, 1, 1}, 2 * c, rng);
    b.norm_gamma = Tensor::full({c}, 1.0, true);
    b.norm_beta = Tensor::zeros({c}, true);
    m.blocks.push_back(std::move(b));
  }
  m.head_w = he_uniform({c * side * side, 2}, c * side * side, rng);
  m.head_b = Tensor::zeros({2}, true);
  return m;
}

Tensor shift_conv(const Tensor& x, const ShiftConvParams& p) {
  Tensor expanded = conv2d(x, p.w1, 1, 0);
  Tensor shifted = shift5(expanded);
  return conv2d(shifted, p.w2, 1, 0);
}

Tensor patch_attention(const Tensor& x, const AttentionParams& p) {
  const std::size_t nb = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
                    w = x.shape()[3];
  const std::size_t s = kAttnPatch;
  const std::size_t ph = (s - h % s) % s;
  const std::size_t pw = (s - w % s) % s;
  Tensor padded =
      (ph || pw) ? pad_hw(x, ph / 2, ph - ph / 2, pw / 2, pw - pw / 2) : x;
  const std::size_t hh = h + ph, ww = w + pw;

  Tensor tokens = patchify(padded, s);  // [N, P, td]
  const std::size_t np = tokens.shape()[1], td = tokens.shape()[2];
  if (p.wq.shape()[0] != td)
    throw DataError("patch_attention: projections sized " +
                    shape_str(p.wq.shape()) + " do not match token dim " +
                    std::to_string(td));
  const std::size_t d = p.wq.shape()[1];

  Tensor flat = reshape(tokens, {nb * np, td});
  Tensor q = reshape(matmul(flat, p.wq), {nb, np, d});
  Tensor k = reshape(matmul(flat, p.wk), {nb, np, d});
  Tensor v = reshape(matmul(flat, p.wv), {nb, np, td});

  Tensor scores = scale(bmm(q, k, /*trans_b=*/true),
                        1.0 / std::sqrt(static_cast<double>(d)));
  Tensor attn = softmax(scores, 2);
  Tensor mixed = bmm(attn, v);  // [N, P, td]

  Tensor img = unpatchify(mixed, s, c, hh, ww);
  if (ph || pw)
    img = crop_hw(img, ph / 2, ph - ph / 2, pw / 2, pw - pw / 2);
  return img;
}

Tensor pcam(const Tensor& x, const BlockParams& b) {
  Tensor fused = add(shift_conv(x, b.shift_conv), patch_attention(x, b.attention));
  return layer_norm_chw(fused, b.norm_gamma, b.norm_beta);
}

Tensor gffn(const Tensor& x, const GffnParams& p) {
  const std::size_t expanded = p.w2.shape()[0];
  Tensor value = conv2d(x, p.w2, 1, 0);
  Tensor phi = add(conv2d(value, p.wd3, expanded, 1),
                   conv2d(value, p.wd5, expanded, 2));
  Tensor gate = gelu(conv2d(x, p.w1, 1, 0));
  Tensor gated = mul(gate, phi);
  return add(conv2d(gated, p.w0, 1, 0), x);
}

Tensor forward(const CAMixerModel& model, const Tensor& batch,
               FeatureSink* sink) {
  const ModelConfig& cfg = model.cfg;
  const std::size_t side = cfg.patch_side();
  if (batch.ndim() != 4 || batch.shape()[1] != cfg.in_channels ||
      batch.shape()[2] != side || batch.shape()[3] != side)
    throw DataError("forward: batch " + shape_str(batch.shape()) +
                    " does not match configured patch shape [N," +
                    std::to_string(cfg.in_channels) + "," +
                    std::to_string(side) + "," + std::to_string(side) + "]");
  const std::size_t nb = batch.shape()[0];

  Tensor x = gelu(conv2d(batch, model.stem1, 1, 1));
  x = gelu(conv2d(x, model.stem2, 1, 1));
  x = gelu(conv2d(x, model.stem3, 1, 1));

  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    const BlockParams& b = model.blocks[i];
    if (cfg.use_pcam()) {
      x = pcam(x, b);
      if (sink)
        sink->on_block_features(i,
                                reshape(x, {nb, cfg.channels * side * side}));
    }
    if (cfg.use_gffn()) x = gffn(x, b.gffn);
  }

  Tensor flat = reshape(x, {nb, cfg.channels * side * side});
  return add_bias(matmul(flat, model.head_w), model.head_b);
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'A', 'M', 'X'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw DataError("model file truncated");
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw DataError("model file truncated");
  return v;
}

}  // namespace

void save_model(const CAMixerModel& model, std::ostream& out) {
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  nlohmann::json cfg{{"channels", model.cfg.channels},
                     {"blocks", model.cfg.blocks},
                     {"beta", model.cfg.beta},
                     {"patch_radius", model.cfg.patch_radius},
                     {"in_channels", model.cfg.in_channels},
                     {"variant", to_string(model.cfg.variant)},
                     {"init_seed", model.cfg.init_seed}};
  const std::string js = cfg.dump();
  write_u64(out, js.size());
  out.write(js.data(), static_cast<std::streamsize>(js.size()));
  for (const Tensor& p : model.parameters()) {
    write_u64(out, p.size());
    out.write(reinterpret_cast<const char*>(p.data().data()),
              static_cast<std::streamsize>(p.size() * sizeof(double)));
  }
  if (!out) throw DataError("model write failed");
}

CAMixerModel load_model(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not a CAMX model file (bad magic)");
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw DataError("unsupported CAMX version " + std::to_string(version));
  const std::uint64_t jlen = read_u64(in);
  std::string js(jlen, '\0');
  if (!in.read(js.data(), static_cast<std::streamsize>(jlen)))
    throw DataError("model file truncated in config block");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt model config: ") + e.what());
  }

  ModelConfig mc;
  mc.channels = cfg.at("channels").get<std::size_t>();
  mc.blocks = cfg.at("blocks").get<std::size_t>();
  mc.beta = cfg.at("beta").get<std::size_t>();
  mc.patch_radius = cfg.at("patch_radius").get<std::size_t>();
  mc.in_channels = cfg.at("in_channels").get<std::size_t>();
  mc.variant = variant_from_string(cfg.at("variant").get<std::string>());
  mc.init_seed = cfg.at("init_seed").get<std::uint64_t>();

  CAMixerModel model = init_model(mc);
  for (Tensor p : model.parameters()) {
    const std::uint64_t count = read_u64(in);
    if (count != p.size())
      throw DataError("model file parameter size mismatch: expected " +
                      std::to_string(p.size()) + ", found " +
                      std::to_string(count));
    if (!in.read(reinterpret_cast<char*>(p.data().data()),
                 static_cast<std::streamsize>(count * sizeof(double))))
      throw DataError("model file truncated in parameter data");
  }
  return model;
}

void save_model_file(const CAMixerModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  save_model(model, out);
}

CAMixerModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return load_model(in);
}

}  // namespace camix
