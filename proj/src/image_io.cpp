#include "camix/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "camix/errors.hpp"

namespace camix {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

// Reads one whitespace-delimited PNM header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {}
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok += static_cast<char>(ch);
  }
  if (tok.empty()) throw DataError("truncated PNM header");
  return tok;
}

}  // namespace

void write_pgm16(const std::string& path, const Pgm16& img) {
  if (img.pixels.size() != img.height * img.width)
    throw DataError("write_pgm16: pixel count does not match extent");
  auto out = open_out(path);
  out << "P5\n" << img.width << " " << img.height << "\n" << img.maxval
      << "\n";
  const bool two_byte = img.maxval > 255;
  for (std::uint16_t p : img.pixels) {
    if (p > img.maxval)
      throw DataError("write_pgm16: pixel exceeds maxval");
    if (two_byte) out.put(static_cast<char>(p >> 8));  // PGM is big-endian
    out.put(static_cast<char>(p & 0xff));
  }
  if (!out) throw DataError("write failed: " + path);
}

Pgm16 read_pgm16(const std::string& path) {
  auto in = open_in(path);
  if (next_token(in) != "P5") throw DataError(path + ": not a P5 PGM");
  Pgm16 img;
  img.width = std::stoul(next_token(in));
  img.height = std::stoul(next_token(in));
  const unsigned long maxval = std::stoul(next_token(in));
  if (maxval == 0 || maxval > 65535)
    throw DataError(path + ": bad maxval " + std::to_string(maxval));
  img.maxval = static_cast<std::uint16_t>(maxval);
  img.pixels.resize(img.width * img.height);
  const bool two_byte = maxval > 255;
  for (std::uint16_t& p : img.pixels) {
    const int hi = two_byte ? in.get() : 0;
    const int lo = in.get();
    if (lo == EOF || (two_byte && hi == EOF))
      throw DataError(path + ": truncated pixel data");
    p = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return img;
}

PgmScale write_pgm_scaled(const std::string& path, std::size_t height,
                          std::size_t width, const std::vector<double>& img) {
  if (img.size() != height * width)
    throw DataError("write_pgm_scaled: extent mismatch");
  const auto [lo_it, hi_it] = std::minmax_element(img.begin(), img.end());
  PgmScale scale{*lo_it, *hi_it};
  const double range = scale.hi - scale.lo;
  Pgm16 out;
  out.height = height;
  out.width = width;
  out.pixels.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double t = range > 0.0 ? (img[i] - scale.lo) / range : 0.0;
    out.pixels[i] = static_cast<std::uint16_t>(std::lround(t * 65535.0));
  }
  write_pgm16(path, out);
  return scale;
}

void write_mask_pgm(const std::string& path, std::size_t height,
                    std::size_t width, const std::vector<std::uint8_t>& mask) {
  Pgm16 img;
  img.height = height;
  img.width = width;
  img.maxval = 1;
  img.pixels.assign(mask.begin(), mask.end());
  write_pgm16(path, img);
}

std::vector<std::uint8_t> read_mask_pgm(const std::string& path,
                                        std::size_t& height,
                                        std::size_t& width) {
  const Pgm16 img = read_pgm16(path);
  height = img.height;
  width = img.width;
  std::vector<std::uint8_t> mask(img.pixels.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    // Accept any maxval: nonzero means changed.
    mask[i] = img.pixels[i] ? 1 : 0;
  }
  return mask;
}

void write_camf(const std::string& path, const CamfImage& img) {
  if (img.data.size() != img.channels * img.height * img.width)
    throw DataError("write_camf: data size does not match header");
  auto out = open_out(path);
  out << "CAMF\n" << img.channels << " " << img.height << " " << img.width
      << "\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size() * sizeof(double)));
  if (!out) throw DataError("write failed: " + path);
}

CamfImage read_camf(const std::string& path) {
  auto in = open_in(path);
  std::string magic;
  std::getline(in, magic);
  if (magic != "CAMF") throw DataError(path + ": not a CAMF file");
  CamfImage img;
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  if (!(hs >> img.channels >> img.height >> img.width))
    throw DataError(path + ": bad CAMF header");
  img.data.resize(img.channels * img.height * img.width);
  if (!in.read(reinterpret_cast<char*>(img.data.data()),
               static_cast<std::streamsize>(img.data.size() * sizeof(double))))
    throw DataError(path + ": truncated CAMF data");
  return img;
}

void write_samples(const std::string& path, const SampleSet& set) {
  auto out = open_out(path);
  out << "CAMS\n" << set.patch_radius << " " << set.channels << " "
      << set.samples.size() << "\n";
  for (const Sample& s : set.samples) {
    const std::uint64_t fields[3] = {s.label, s.cy, s.cx};
    out.write(reinterpret_cast<const char*>(fields), sizeof fields);
    out.write(reinterpret_cast<const char*>(s.patch.data()),
              static_cast<std::streamsize>(s.patch.size() * sizeof(double)));
  }
  if (!out) throw DataError("write failed: " + path);
}

SampleSet read_samples(const std::string& path) {
  auto in = open_in(path);
  std::string magic;
  std::getline(in, magic);
  if (magic != "CAMS") throw DataError(path + ": not a CAMS file");
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  SampleSet set;
  std::size_t count = 0;
  if (!(hs >> set.patch_radius >> set.channels >> count))
    throw DataError(path + ": bad CAMS header");
  const std::size_t side = 2 * set.patch_radius + 1;
  const std::size_t psz = set.channels * side * side;
  set.samples.resize(count);
  for (Sample& s : set.samples) {
    std::uint64_t fields[3];
    if (!in.read(reinterpret_cast<char*>(fields), sizeof fields))
      throw DataError(path + ": truncated sample header");
    s.label = static_cast<std::uint8_t>(fields[0]);
    s.cy = fields[1];
    s.cx = fields[2];
    s.patch.resize(psz);
    if (!in.read(reinterpret_cast<char*>(s.patch.data()),
                 static_cast<std::streamsize>(psz * sizeof(double))))
      throw DataError(path + ": truncated sample data");
  }
  return set;
}

}  // namespace camix
