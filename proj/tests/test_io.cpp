#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include "camix/config.hpp"
#include "camix/errors.hpp"
#include "camix/image_io.hpp"

using namespace camix;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("camix_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

}  // namespace

TEST_CASE("pgm16 round-trip is lossless") {
  TempDir tmp;
  Pgm16 img;
  img.height = 5;
  img.width = 7;
  img.maxval = 65535;
  std::mt19937_64 rng(1);
  img.pixels.resize(35);
  for (auto& p : img.pixels) p = static_cast<std::uint16_t>(rng());
  write_pgm16(tmp.file("a.pgm"), img);
  const Pgm16 back = read_pgm16(tmp.file("a.pgm"));
  CHECK(back.height == img.height);
  CHECK(back.width == img.width);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("mask pgm uses maxval 1 and survives a round-trip") {
  TempDir tmp;
  std::vector<std::uint8_t> mask{0, 1, 1, 0, 1, 0};
  write_mask_pgm(tmp.file("m.pgm"), 2, 3, mask);
  std::size_t h, w;
  CHECK(read_mask_pgm(tmp.file("m.pgm"), h, w) == mask);
  CHECK(h == 2);
  CHECK(w == 3);
}

TEST_CASE("camf stores doubles exactly") {
  TempDir tmp;
  CamfImage img;
  img.channels = 2;
  img.height = 3;
  img.width = 4;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  img.data.resize(24);
  for (auto& v : img.data) v = d(rng);
  write_camf(tmp.file("x.camf"), img);
  const CamfImage back = read_camf(tmp.file("x.camf"));
  CHECK(back.channels == 2);
  CHECK(back.data == img.data);
}

TEST_CASE("camf rejects a truncated file") {
  TempDir tmp;
  CamfImage img{1, 2, 2, {1, 2, 3, 4}};
  write_camf(tmp.file("t.camf"), img);
  // Truncate.
  fs::resize_file(tmp.file("t.camf"), 20);
  CHECK_THROWS_AS(read_camf(tmp.file("t.camf")), DataError);
}

TEST_CASE("sample archive round-trips") {
  TempDir tmp;
  SampleSet set;
  set.patch_radius = 2;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0, 1);
  for (int i = 0; i < 7; ++i) {
    Sample s;
    s.label = i & 1;
    s.cy = i * 3;
    s.cx = i + 1;
    s.patch.resize(3 * 25);
    for (auto& v : s.patch) v = d(rng);
    set.samples.push_back(std::move(s));
  }
  write_samples(tmp.file("s.cams"), set);
  const SampleSet back = read_samples(tmp.file("s.cams"));
  REQUIRE(back.samples.size() == 7);
  CHECK(back.patch_radius == 2);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(back.samples[i].label == set.samples[i].label);
    CHECK(back.samples[i].cy == set.samples[i].cy);
    CHECK(back.samples[i].patch == set.samples[i].patch);
  }
}

TEST_CASE("run config round-trips through text and rejects unknown keys") {
  RunConfig cfg;
  cfg.epochs = 17;
  cfg.variant = "no_pcam";
  cfg.learning_rate = 0.005;
  RunConfig parsed;
  std::istringstream lines(cfg.to_text());
  std::string line;
  while (std::getline(lines, line)) apply_config_line(parsed, line);
  CHECK(parsed.epochs == 17);
  CHECK(parsed.variant == "no_pcam");
  CHECK(parsed.learning_rate == 0.005);
  CHECK(parsed.to_text() == cfg.to_text());
  CHECK(parsed.hash() == cfg.hash());

  RunConfig other;
  CHECK_THROWS_AS(apply_config_line(other, "epoch_count=3"), DataError);
  CHECK_THROWS_AS(apply_config_line(other, "variant=bogus"), DataError);
  CHECK_THROWS_AS(apply_config_line(other, "nonsense line"), DataError);
  // Comments and blanks are fine.
  apply_config_line(other, "# comment");
  apply_config_line(other, "");
}
