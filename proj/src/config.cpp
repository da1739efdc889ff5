#include "camix/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "camix/errors.hpp"

namespace camix {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_num(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T v{};
  if (!(is >> v) || !(is >> std::ws).eof())
    throw DataError("config: bad value '" + value + "' for key '" + key + "'");
  return v;
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig mc;
  mc.channels = channels;
  mc.blocks = blocks;
  mc.beta = beta;
  mc.patch_radius = patch_radius;
  mc.variant = variant_from_string(variant);
  mc.init_seed = seed;
  return mc;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "height=" << height << "\n"
     << "width=" << width << "\n"
     << "looks=" << looks << "\n"
     << "change_gain=" << change_gain << "\n"
     << "seed=" << seed << "\n"
     << "coarse_clusters=" << coarse_clusters << "\n"
     << "patch_radius=" << patch_radius << "\n"
     << "sample_cap=" << sample_cap << "\n"
     << "epochs=" << epochs << "\n"
     << "batch_size=" << batch_size << "\n"
     << "learning_rate=" << learning_rate << "\n"
     << "momentum=" << momentum << "\n"
     << "channels=" << channels << "\n"
     << "blocks=" << blocks << "\n"
     << "beta=" << beta << "\n"
     << "variant=" << variant << "\n"
     << "tile_size=" << tile_size << "\n";
  return os.str();
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "height") height = parse_num<std::size_t>(key, value);
  else if (key == "width") width = parse_num<std::size_t>(key, value);
  else if (key == "looks") looks = parse_num<std::uint32_t>(key, value);
  else if (key == "change_gain") change_gain = parse_num<double>(key, value);
  else if (key == "seed") seed = parse_num<std::uint64_t>(key, value);
  else if (key == "coarse_clusters") coarse_clusters = parse_num<std::size_t>(key, value);
  else if (key == "patch_radius") patch_radius = parse_num<std::size_t>(key, value);
  else if (key == "sample_cap") sample_cap = parse_num<std::size_t>(key, value);
  else if (key == "epochs") epochs = parse_num<std::size_t>(key, value);
  else if (key == "batch_size") batch_size = parse_num<std::size_t>(key, value);
  else if (key == "learning_rate") learning_rate = parse_num<double>(key, value);
  else if (key == "momentum") momentum = parse_num<double>(key, value);
  else if (key == "channels") channels = parse_num<std::size_t>(key, value);
  else if (key == "blocks") blocks = parse_num<std::size_t>(key, value);
  else if (key == "beta") beta = parse_num<std::size_t>(key, value);
  else if (key == "variant") {
    variant_from_string(value);  // validate
    variant = value;
  }
  else if (key == "tile_size") tile_size = parse_num<std::size_t>(key, value);
  else throw DataError("config: unknown key '" + key + "'");
}

void apply_config_line(RunConfig& cfg, const std::string& raw) {
  const std::string line = trim(raw);
  if (line.empty() || line[0] == '#') return;
  const auto eq = line.find('=');
  if (eq == std::string::npos)
    throw DataError("config: expected key=value, got '" + line + "'");
  cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  std::string line;
  while (std::getline(in, line)) apply_config_line(base, line);
  return base;
}

std::string RunConfig::hash() const {
  const std::string text = to_text();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace camix
