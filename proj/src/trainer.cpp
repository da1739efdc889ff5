#include "camix/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "camix/errors.hpp"

namespace camix {

namespace {

Tensor batch_tensor(const SampleSet& set, const std::vector<std::size_t>& idx,
                    std::size_t lo, std::size_t hi) {
  const std::size_t side = 2 * set.patch_radius + 1;
  const std::size_t psz = set.channels * side * side;
  std::vector<double> data((hi - lo) * psz);
  for (std::size_t i = lo; i < hi; ++i) {
    const Sample& s = set.samples[idx[i]];
    std::copy(s.patch.begin(), s.patch.end(), data.begin() + (i - lo) * psz);
  }
  return Tensor(std::move(data), {hi - lo, set.channels, side, side});
}

}  // namespace

TrainResult train(const SampleSet& samples, const TrainConfig& cfg,
                  FeatureSink* sink) {
  if (samples.samples.empty())
    throw DataError("train: empty sample set");
  const std::size_t side = 2 * samples.patch_radius + 1;
  if (side != cfg.model.patch_side())
    throw DataError("train: sample patch side " + std::to_string(side) +
                    " does not match model patch side " +
                    std::to_string(cfg.model.patch_side()));

  ModelConfig mc = cfg.model;
  mc.init_seed = cfg.seed;
  TrainResult result{init_model(mc), {}};
  std::vector<Tensor> params = result.model.parameters();
  std::vector<std::vector<double>> velocity(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    velocity[i].assign(params[i].size(), 0.0);

  std::mt19937_64 rng(cfg.seed ^ 0x5bf0363546d9f1b3ULL);
  std::vector<std::size_t> order(samples.samples.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(lo + cfg.batch_size, order.size());
      Tensor batch = batch_tensor(samples, order, lo, hi);
      std::vector<std::size_t> labels(hi - lo);
      for (std::size_t i = lo; i < hi; ++i)
        labels[i - lo] = samples.samples[order[i]].label;

      for (Tensor& p : params) p.zero_grad();
      Tensor logits = forward(result.model, batch, sink);
      Tensor loss = cross_entropy(logits, labels);
      const double loss_val = loss.item();
      if (!std::isfinite(loss_val))
        throw NumericError(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            ", batch " + std::to_string(batches) +
            " (learning rate " + std::to_string(cfg.learning_rate) +
            " is likely too high)");
      backward(loss);

      for (std::size_t i = 0; i < params.size(); ++i) {
        // Ablated variants leave some parameters outside the graph.
        if (!params[i].has_grad()) continue;
        std::vector<double>& w = params[i].data();
        const std::vector<double>& g = params[i].grad();
        std::vector<double>& v = velocity[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
          v[j] = cfg.momentum * v[j] - cfg.learning_rate * g[j];
          w[j] += v[j];
        }
      }
      epoch_loss += loss_val;
      ++batches;
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

ChangeMap predict_map(const CAMixerModel& model, const ImagePair& pair,
                      std::size_t tile_size, FeatureSink* sink) {
  if (pair.t1.size() != pair.height * pair.width ||
      pair.t2.size() != pair.t1.size())
    throw DataError("predict_map: pair extents disagree");
  if (tile_size == 0) throw DataError("predict_map: tile size must be > 0");

  const DifferenceImage di = log_ratio(pair);
  const InputStack stack = build_input_stack(pair, di);
  const std::size_t r = model.cfg.patch_radius;
  const std::size_t side = model.cfg.patch_side();
  const std::size_t total = pair.height * pair.width;

  ChangeMap out;
  out.height = pair.height;
  out.width = pair.width;
  out.map.assign(total, 0);

  const std::size_t psz = 3 * side * side;
  for (std::size_t lo = 0; lo < total; lo += tile_size) {
    const std::size_t hi = std::min(lo + tile_size, total);
    std::vector<double> data((hi - lo) * psz);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto patch =
          extract_patch(stack, i / pair.width, i % pair.width, r);
      std::copy(patch.begin(), patch.end(), data.begin() + (i - lo) * psz);
    }
    Tensor batch(std::move(data), {hi - lo, 3, side, side});
    Tensor logits = forward(model, batch, sink);
    for (std::size_t i = lo; i < hi; ++i) {
      const double l0 = logits.data()[(i - lo) * 2];
      const double l1 = logits.data()[(i - lo) * 2 + 1];
      out.map[i] = l1 > l0 ? 1 : 0;
    }
  }
  return out;
}

}  // namespace camix
