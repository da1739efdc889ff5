#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "camix/config.hpp"
#include "camix/errors.hpp"
#include "camix/image_io.hpp"
#include "camix/pipeline.hpp"

namespace fs = std::filesystem;
using namespace camix;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = "run";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

RunConfig resolve_config(const GlobalOpts& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) cfg = load_run_config(g.config_path, cfg);
  if (g.seed_set) cfg.seed = g.seed;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
}

// Every command leaves its resolved configuration next to its outputs so
// the run can be reproduced exactly.
void write_manifest(const fs::path& dir, const RunConfig& cfg,
                    const std::string& extra = "") {
  std::string text = cfg.to_text();
  text += "# config_hash=" + cfg.hash() + "\n";
  text += extra;
  write_text(dir / "run.config", text);
}

ImagePair read_pair(const fs::path& dir, const std::string& t1,
                    const std::string& t2) {
  const CamfImage a = read_camf(t1.empty() ? (dir / "t1.camf").string() : t1);
  const CamfImage b = read_camf(t2.empty() ? (dir / "t2.camf").string() : t2);
  if (a.height != b.height || a.width != b.width || a.channels != 1 ||
      b.channels != 1)
    throw DataError("input pair extents disagree");
  ImagePair pair;
  pair.height = a.height;
  pair.width = a.width;
  pair.t1 = a.data;
  pair.t2 = b.data;
  return pair;
}

// Crude line plot of (x, y) onto a PGM raster.
void write_plot_pgm(const fs::path& path, const std::vector<double>& ys) {
  const std::size_t w = 256, h = 160, margin = 10;
  std::vector<std::uint16_t> img(w * h, 65535);
  if (ys.size() >= 2) {
    double lo = ys[0], hi = ys[0];
    for (double y : ys) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    if (hi - lo < 1e-9) hi = lo + 1e-9;
    auto px = [&](std::size_t i) {
      return margin + i * (w - 2 * margin - 1) / (ys.size() - 1);
    };
    auto py = [&](double y) {
      const double t = (y - lo) / (hi - lo);
      return h - 1 - margin -
             static_cast<std::size_t>(t * static_cast<double>(h - 2 * margin - 1));
    };
    for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
      const std::ptrdiff_t x0 = px(i), y0 = py(ys[i]);
      const std::ptrdiff_t x1 = px(i + 1), y1 = py(ys[i + 1]);
      const std::ptrdiff_t steps = std::max<std::ptrdiff_t>(
          std::abs(x1 - x0), std::max<std::ptrdiff_t>(std::abs(y1 - y0), 1));
      for (std::ptrdiff_t s = 0; s <= steps; ++s) {
        const std::ptrdiff_t x = x0 + (x1 - x0) * s / steps;
        const std::ptrdiff_t y = y0 + (y1 - y0) * s / steps;
        img[y * static_cast<std::ptrdiff_t>(w) + x] = 0;
      }
    }
  }
  write_pgm16(path.string(), {h, w, 65535, std::move(img)});
}

void cmd_generate(const GlobalOpts& g) {
  const RunConfig cfg = resolve_config(g);
  fs::create_directories(g.out_dir);
  const fs::path dir(g.out_dir);

  SyntheticScene scene = default_scene(cfg.height, cfg.width, cfg.change_gain,
                                       cfg.looks, cfg.seed);
  const GeneratedPair gen = generate(scene);

  write_camf((dir / "t1.camf").string(),
             {1, cfg.height, cfg.width, gen.pair.t1});
  write_camf((dir / "t2.camf").string(),
             {1, cfg.height, cfg.width, gen.pair.t2});
  const PgmScale s1 =
      write_pgm_scaled((dir / "t1.pgm").string(), cfg.height, cfg.width, gen.pair.t1);
  const PgmScale s2 =
      write_pgm_scaled((dir / "t2.pgm").string(), cfg.height, cfg.width, gen.pair.t2);
  write_mask_pgm((dir / "mask.pgm").string(), cfg.height, cfg.width, gen.truth);

  std::size_t changed = 0;
  for (auto v : gen.truth) changed += v;
  std::ostringstream extra;
  extra << "# t1_pgm_scale=" << s1.lo << ":" << s1.hi << "\n"
        << "# t2_pgm_scale=" << s2.lo << ":" << s2.hi << "\n"
        << "# changed_pixels=" << changed << "\n";
  write_manifest(dir, cfg, extra.str());
  std::cout << "wrote pair + mask to " << dir.string() << " (changed pixels: "
            << changed << ")\n";
}

void cmd_preclassify(const GlobalOpts& g, const std::string& t1,
                     const std::string& t2, const std::string& in_dir) {
  const RunConfig cfg = resolve_config(g);
  fs::create_directories(g.out_dir);
  const fs::path dir(g.out_dir);
  const ImagePair pair = read_pair(in_dir, t1, t2);

  const DifferenceImage di = log_ratio(pair);
  const PreclassLabels labels = preclassify(di, cfg);
  const SampleSet samples = mine_samples(pair, di, labels, cfg.patch_radius,
                                         cfg.sample_cap, cfg.seed);

  write_camf((dir / "di.camf").string(), {1, di.height, di.width, di.values});
  write_pgm_scaled((dir / "di.pgm").string(), di.height, di.width, di.values);
  Pgm16 lab;
  lab.height = labels.height;
  lab.width = labels.width;
  lab.maxval = 2;
  lab.pixels.resize(labels.labels.size());
  for (std::size_t i = 0; i < lab.pixels.size(); ++i)
    lab.pixels[i] = static_cast<std::uint16_t>(labels.labels[i]);
  write_pgm16((dir / "labels.pgm").string(), lab);
  write_samples((dir / "samples.cams").string(), samples);
  write_manifest(dir, cfg);

  std::size_t nc = 0;
  for (const Sample& s : samples.samples) nc += s.label;
  std::cout << "mined " << samples.samples.size() << " samples (" << nc
            << " changed / " << samples.samples.size() - nc
            << " unchanged) to " << dir.string() << "\n";
}

void cmd_train(const GlobalOpts& g, const std::string& samples_path) {
  const RunConfig cfg = resolve_config(g);
  fs::create_directories(g.out_dir);
  const fs::path dir(g.out_dir);

  const SampleSet samples = read_samples(samples_path);
  const TrainResult result = train(samples, train_config(cfg));

  save_model_file(result.model, (dir / "model.camx").string());
  std::ostringstream csv;
  csv << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < result.loss_history.size(); ++e)
    csv << e << "," << result.loss_history[e] << "\n";
  write_text(dir / "loss.csv", csv.str());
  write_manifest(dir, cfg);
  std::cout << "trained " << cfg.variant << " model, final loss "
            << result.loss_history.back() << ", saved to "
            << (dir / "model.camx").string() << "\n";
}

// Streams post-PCAM activations to a CSV, one row per sample per block.
class CsvFeatureSink : public FeatureSink {
 public:
  explicit CsvFeatureSink(const std::string& path) : out_(path) {
    if (!out_) throw DataError("cannot open " + path + " for writing");
  }
  void on_block_features(std::size_t block, const Tensor& f) override {
    const std::size_t n = f.shape()[0], d = f.shape()[1];
    for (std::size_t i = 0; i < n; ++i) {
      out_ << block;
      for (std::size_t j = 0; j < d; ++j) out_ << "," << f.data()[i * d + j];
      out_ << "\n";
    }
  }

 private:
  std::ofstream out_;
};

void cmd_predict(const GlobalOpts& g, const std::string& model_path,
                 const std::string& t1, const std::string& t2,
                 const std::string& in_dir, const std::string& dump_features) {
  const RunConfig cfg = resolve_config(g);
  fs::create_directories(g.out_dir);
  const fs::path dir(g.out_dir);

  const CAMixerModel model = load_model_file(model_path);
  const ImagePair pair = read_pair(in_dir, t1, t2);

  std::unique_ptr<CsvFeatureSink> sink;
  if (!dump_features.empty())
    sink = std::make_unique<CsvFeatureSink>(dump_features);
  const ChangeMap map = predict_map(model, pair, cfg.tile_size, sink.get());

  write_mask_pgm((dir / "changemap.pgm").string(), map.height, map.width,
                 map.map);
  write_manifest(dir, cfg);
  std::cout << "wrote change map to " << (dir / "changemap.pgm").string()
            << "\n";
}

void cmd_evaluate(const GlobalOpts& g, const std::string& pred_path,
                  const std::string& truth_path) {
  const RunConfig cfg = resolve_config(g);
  std::size_t h1, w1, h2, w2;
  const auto pred = read_mask_pgm(pred_path, h1, w1);
  const auto truth = read_mask_pgm(truth_path, h2, w2);
  if (h1 != h2 || w1 != w2) throw DataError("evaluate: extent mismatch");
  const MetricReport r = evaluate(pred, truth);
  std::cout << r.table();
  fs::create_directories(g.out_dir);
  write_text(fs::path(g.out_dir) / "metrics.csv",
             MetricReport::csv_header() + "\n" + r.csv_row() + "\n");
  write_manifest(g.out_dir, cfg);
}

void cmd_sweep(const GlobalOpts& g, std::size_t n_max) {
  RunConfig cfg = resolve_config(g);
  fs::create_directories(g.out_dir);
  const fs::path dir(g.out_dir);

  std::ostringstream csv;
  csv << "blocks,pcc\n";
  std::vector<double> pccs;
  for (std::size_t n = 0; n <= n_max; ++n) {
    RunConfig c = cfg;
    c.blocks = n;
    if (n == 0) c.variant = "basic";
    const PipelineResult r = run_pipeline(c);
    csv << n << "," << r.report.pcc << "\n";
    pccs.push_back(r.report.pcc);
    std::cout << "N=" << n << "  PCC=" << 100.0 * r.report.pcc << "%\n";
  }
  write_text(dir / "sweep.csv", csv.str());
  write_plot_pgm(dir / "sweep.pgm", pccs);
  write_manifest(dir, cfg);
}

void cmd_ablate(const GlobalOpts& g) {
  RunConfig cfg = resolve_config(g);
  fs::create_directories(g.out_dir);
  const fs::path dir(g.out_dir);

  const char* variants[] = {"basic", "no_pcam", "no_gffn", "fcm_precls",
                            "full"};
  std::ostringstream table;
  table << "variant,pcc,kc\n";
  for (const char* v : variants) {
    RunConfig c = cfg;
    c.variant = v;
    const PipelineResult r = run_pipeline(c);
    table << v << "," << r.report.pcc << "," << r.report.kc << "\n";
    std::cout << v << "  PCC=" << 100.0 * r.report.pcc
              << "%  KC=" << 100.0 * r.report.kc << "%\n";
  }
  write_text(dir / "ablation.csv", table.str());
  write_manifest(dir, cfg);
  std::cout << "config hash: " << cfg.hash() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAMixer change-detection pipeline"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "key=value config file")
      ->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", g.seed, "override the run seed");

  auto* gen = app.add_subcommand("generate", "synthesize a speckled pair");
  auto* pre = app.add_subcommand("preclassify",
                                 "difference image, clustering, sample mining");
  auto* tr = app.add_subcommand("train", "train on a mined sample archive");
  auto* pr = app.add_subcommand("predict", "pixel-wise change map");
  auto* ev = app.add_subcommand("evaluate", "compare change map with truth");
  auto* sw = app.add_subcommand("sweep", "PCC vs number of mixing blocks");
  auto* ab = app.add_subcommand("ablate", "run the five network variants");

  std::string t1, t2, in_dir = "run", samples_path, model_path, dump_features;
  std::string pred_path, truth_path;
  std::size_t n_max = 5;
  for (CLI::App* c : {pre, pr}) {
    c->add_option("--t1", t1, "t1 CAMF image");
    c->add_option("--t2", t2, "t2 CAMF image");
    c->add_option("--in", in_dir, "directory with t1.camf/t2.camf");
  }
  tr->add_option("--samples", samples_path, "CAMS sample archive")
      ->required();
  pr->add_option("--model", model_path, "CAMX model file")->required();
  pr->add_option("--dump-features", dump_features,
                 "write post-attention features to this CSV");
  ev->add_option("--pred", pred_path, "predicted change map (PGM)")
      ->required();
  ev->add_option("--truth", truth_path, "ground truth mask (PGM)")
      ->required();
  sw->add_option("--n-max", n_max, "largest block count (sweeps 0..n-max)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  g.seed_set = seed_opt->count() > 0;
  try {
    if (gen->parsed()) cmd_generate(g);
    else if (pre->parsed()) cmd_preclassify(g, t1, t2, in_dir);
    else if (tr->parsed()) cmd_train(g, samples_path);
    else if (pr->parsed()) cmd_predict(g, model_path, t1, t2, in_dir, dump_features);
    else if (ev->parsed()) cmd_evaluate(g, pred_path, truth_path);
    else if (sw->parsed()) cmd_sweep(g, n_max);
    else if (ab->parsed()) cmd_ablate(g);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
