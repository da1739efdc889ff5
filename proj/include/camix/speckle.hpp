#pragma once

#include <cstdint>
#include <vector>

namespace camix {

// Co-registered bitemporal single-channel intensity images.
struct ImagePair {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> t1;  // row-major, height*width
  std::vector<double> t2;
};

struct SyntheticScene {
  std::size_t height = 128;
  std::size_t width = 128;
  std::vector<double> base_reflectivity;  // strictly positive
  std::vector<std::uint8_t> change_mask;  // {0,1}
  double change_gain = 3.0;
  std::uint32_t looks = 4;  // L-look intensity speckle
  std::uint64_t seed = 0;
};

// Default desk-scale scene: smooth reflectivity, two rectangles and one
// ellipse of change covering 8-15% of the pixels.
SyntheticScene default_scene(std::size_t height = 128, std::size_t width = 128,
                             double change_gain = 3.0, std::uint32_t looks = 4,
                             std::uint64_t seed = 7);

struct GeneratedPair {
  ImagePair pair;
  std::vector<std::uint8_t> truth;  // copy of the scene's change mask
};

// I1 = base * S1, I2 = (base, gained under the mask) * S2 with S1, S2 i.i.d.
// gamma(L, 1/L) speckle fields. Deterministic for a fixed seed.
GeneratedPair generate(const SyntheticScene& scene);

// Mean-one multiplicative speckle samples (exposed for the moment tests).
std::vector<double> speckle_field(std::size_t count, std::uint32_t looks,
                                  std::uint64_t seed);

}  // namespace camix
