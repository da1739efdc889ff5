#include "camix/pipeline.hpp"

namespace camix {

PreclassLabels preclassify(const DifferenceImage& di, const RunConfig& cfg) {
  if (variant_from_string(cfg.variant) == Variant::FcmPrecls)
    return fcm_preclassify(di);
  return hierarchical_fcm(di, cfg.coarse_clusters);
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.momentum = cfg.momentum;
  tc.seed = cfg.seed;
  tc.model = cfg.model_config();
  return tc;
}

PipelineResult run_pipeline(const RunConfig& cfg) {
  PipelineResult r;
  SyntheticScene scene = default_scene(cfg.height, cfg.width, cfg.change_gain,
                                       cfg.looks, cfg.seed);
  r.generated = generate(scene);
  r.di = log_ratio(r.generated.pair);
  r.labels = preclassify(r.di, cfg);
  r.samples = mine_samples(r.generated.pair, r.di, r.labels, cfg.patch_radius,
                           cfg.sample_cap, cfg.seed);
  r.trained = train(r.samples, train_config(cfg));
  r.map = predict_map(r.trained.model, r.generated.pair, cfg.tile_size);
  r.report = evaluate(r.map.map, r.generated.truth);
  return r;
}

}  // namespace camix
