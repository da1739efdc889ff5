#pragma once

#include <cstdint>
#include <vector>

#include "camix/speckle.hpp"

namespace camix {

struct DifferenceImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // normalized to [0,1]
  double raw_min = 0.0;        // normalization record
  double raw_max = 0.0;
};

// DI(p) = |log((I2+1)/(I1+1))|, min-max normalized. A constant-zero raw
// image normalizes to zeros.
DifferenceImage log_ratio(const ImagePair& pair);

struct FcmResult {
  std::vector<double> centroids;    // sorted order is NOT implied
  std::vector<double> memberships;  // n x c, row-major
  std::vector<double> objective;    // per accepted iteration
  std::size_t iterations = 0;
  bool degenerate = false;  // all inputs identical: single-cluster fallback
};

// Scalar fuzzy c-means. Deterministic: centroids start at evenly spaced
// quantiles of the sorted values.
FcmResult fcm(const std::vector<double>& values, std::size_t c,
              double m = 2.0, double tol = 1e-5, std::size_t max_iter = 100);

enum class PixelClass : std::uint8_t { Unchanged = 0, Changed = 1, Intermediate = 2 };

struct PreclassLabels {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<PixelClass> labels;
  // Per-pixel membership over {unchanged, changed, intermediate}; sums to 1.
  std::vector<double> memberships;
  bool degenerate = false;
};

// Two-stage scheme over the 3x3 local mean of the difference image:
// coarse FCM with c1 clusters, then the highest-centroid cluster is
// re-clustered into 3 and split top/middle/bottom into
// changed/intermediate/unchanged; of the remaining coarse clusters the
// second-highest becomes intermediate, the rest unchanged.
PreclassLabels hierarchical_fcm(const DifferenceImage& di, std::size_t c1 = 5);

// Single-stage FCM with c=3 (the plain-clustering ablation).
PreclassLabels fcm_preclassify(const DifferenceImage& di);

struct Sample {
  std::uint8_t label = 0;  // 0 unchanged, 1 changed
  std::size_t cy = 0;
  std::size_t cx = 0;
  std::vector<double> patch;  // 3 x (2r+1) x (2r+1), channels I1, I2, DI
};

struct SampleSet {
  std::size_t patch_radius = 3;
  std::size_t channels = 3;
  std::vector<Sample> samples;
};

// Normalized 3-channel stack (I1, I2, DI) used for both mining and
// inference; channel-major, height*width each.
struct InputStack {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;  // 3 * height * width
};

InputStack build_input_stack(const ImagePair& pair, const DifferenceImage& di);

// (2r+1)^2 x 3 patch around (cy, cx) with symmetric reflection at borders.
std::vector<double> extract_patch(const InputStack& stack, std::size_t cy,
                                  std::size_t cx, std::size_t r);

SampleSet mine_samples(const ImagePair& pair, const DifferenceImage& di,
                       const PreclassLabels& labels, std::size_t r,
                       std::size_t cap, std::uint64_t seed);

}  // namespace camix
