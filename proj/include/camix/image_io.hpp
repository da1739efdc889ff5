#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camix/preclassify.hpp"

namespace camix {

struct Pgm16 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint16_t maxval = 65535;
  std::vector<std::uint16_t> pixels;
};

void write_pgm16(const std::string& path, const Pgm16& img);
Pgm16 read_pgm16(const std::string& path);

// Scales a float image onto [0, 65535] and writes it; returns the scale
// record (min, max) so the mapping is invertible from the manifest.
struct PgmScale {
  double lo = 0.0;
  double hi = 1.0;
};
PgmScale write_pgm_scaled(const std::string& path, std::size_t height,
                          std::size_t width, const std::vector<double>& img);

void write_mask_pgm(const std::string& path, std::size_t height,
                    std::size_t width, const std::vector<std::uint8_t>& mask);
std::vector<std::uint8_t> read_mask_pgm(const std::string& path,
                                        std::size_t& height,
                                        std::size_t& width);

// "CAMF": float-exact raster, text header then raw little-endian f64.
struct CamfImage {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;  // channel-major
};
void write_camf(const std::string& path, const CamfImage& img);
CamfImage read_camf(const std::string& path);

// "CAMS": mined sample archive.
void write_samples(const std::string& path, const SampleSet& set);
SampleSet read_samples(const std::string& path);

}  // namespace camix
