#pragma once

#include "camix/config.hpp"
#include "camix/metrics.hpp"
#include "camix/preclassify.hpp"
#include "camix/speckle.hpp"
#include "camix/trainer.hpp"

namespace camix {

// Preclassification stage as selected by the variant (hierarchical FCM,
// or plain 3-cluster FCM for the w/o-hierarchical-clustering ablation).
PreclassLabels preclassify(const DifferenceImage& di, const RunConfig& cfg);

struct PipelineResult {
  GeneratedPair generated;
  DifferenceImage di;
  PreclassLabels labels;
  SampleSet samples;
  TrainResult trained;
  ChangeMap map;
  MetricReport report;
};

// generate -> log-ratio -> clustering -> mining -> training -> inference
// -> metrics, all on the synthetic scene described by cfg.
PipelineResult run_pipeline(const RunConfig& cfg);

TrainConfig train_config(const RunConfig& cfg);

}  // namespace camix
