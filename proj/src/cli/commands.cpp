#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "segforge/cli.hpp"
#include "segforge/synthetic.hpp"

namespace segforge::cli {
namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) throw usage_error("no output directory given (--out or paths.output)");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw data_error("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw runtime_error("failed writing " + path.string());
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// Sorted *.png stems of a directory; empty when the directory is absent.
std::map<std::string, fs::path> png_stems(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.emplace(e.path().stem().string(), e.path());
  }
  return out;
}

// Shenzhen masks are often named <id>_mask.png.
const fs::path* find_mask(const std::map<std::string, fs::path>& masks, const std::string& stem) {
  if (auto it = masks.find(stem); it != masks.end()) return &it->second;
  if (auto it = masks.find(stem + "_mask"); it != masks.end()) return &it->second;
  return nullptr;
}

bool all_synthetic(const DatasetManifest& m) {
  return std::all_of(m.entries.begin(), m.entries.end(),
                     [](const ManifestEntry& e) { return e.source == Source::synthetic; });
}

WarningSink warn_to(std::ostream& log) {
  return [&log](const std::string& msg) { log << "warning: " << msg << '\n'; };
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return kExitUsage;
    case ErrorKind::data: return kExitData;
    case ErrorKind::runtime: return kExitRuntime;
  }
  return kExitRuntime;
}

void cmd_synth(const RunConfig& config, const SynthOptions& options, std::ostream& log) {
  ensure_dir(config.output);
  SyntheticOptions so;
  so.count = options.count;
  so.height = options.height;
  so.width = options.width;
  so.seed = config.seed;
  so.train_fraction = config.train_fraction;
  const auto m = generate_synthetic(config.output, so);
  log << "wrote " << m.entries.size() << " synthetic samples (" << m.count(Split::train) << " train, "
      << m.count(Split::test) << " test) and " << (config.output / "manifest.tsv").string() << '\n';
}

DatasetManifest cmd_prepare(const RunConfig& config, const fs::path& raw_dir, std::ostream& log) {
  if (!fs::is_directory(raw_dir)) throw data_error("raw data directory not found: " + raw_dir.string());
  ensure_dir(config.output);
  const fs::path manifest_path = config.manifest.empty() ? config.output / "manifest.tsv" : config.manifest;

  DatasetManifest m;
  m.base_dir = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
  std::vector<std::string> problems;
  std::set<std::string> ids;
  const auto warn = warn_to(log);

  auto check_orphans = [&](const std::string& source, const std::map<std::string, fs::path>& images,
                           const std::map<std::string, fs::path>& masks, const std::string& folder) {
    for (const auto& [stem, path] : masks) {
      std::string id = stem;
      if (!images.count(id) && id.size() > 5 && id.ends_with("_mask")) id.resize(id.size() - 5);
      if (!images.count(id)) problems.push_back(source + "/" + id + ": " + folder + "/" + path.filename().string() + " has no image");
    }
  };
  auto claim = [&](const std::string& source, const std::string& id) {
    if (ids.insert(id).second) return true;
    problems.push_back(source + "/" + id + ": id already used by another source");
    return false;
  };
  auto same_size = [&](const std::string& source, const std::string& id, const fs::path& img,
                       const std::vector<fs::path>& masks) {
    const GrayImage8 im = read_png_gray(img);
    for (const auto& mp : masks) {
      const GrayImage8 mk = read_png_gray(mp);
      if (mk.height != im.height || mk.width != im.width) {
        problems.push_back(source + "/" + id + ": " + mp.filename().string() + " is " + std::to_string(mk.width) + "x" +
                           std::to_string(mk.height) + " but the image is " + std::to_string(im.width) + "x" +
                           std::to_string(im.height));
        return false;
      }
    }
    return true;
  };

  // montgomery: two lobe masks per image, merged into one mask file
  {
    const fs::path root = raw_dir / "montgomery";
    const auto images = png_stems(root / "images");
    const auto left = png_stems(root / "masks_left");
    const auto right = png_stems(root / "masks_right");
    const fs::path merged_dir = config.output / "montgomery" / "masks_merged";
    if (!images.empty()) ensure_dir(merged_dir);
    for (const auto& [id, img] : images) {
      const fs::path* l = find_mask(left, id);
      const fs::path* r = find_mask(right, id);
      if (!l) problems.push_back("montgomery/" + id + ": missing masks_left/" + id + ".png");
      if (!r) problems.push_back("montgomery/" + id + ": missing masks_right/" + id + ".png");
      if (!l || !r || !claim("montgomery", id) || !same_size("montgomery", id, img, {*l, *r})) continue;
      const BinaryMask merged = merge_lobes(read_mask_png(*l, warn), read_mask_png(*r, warn), config.lobes);
      write_mask_png(merged_dir / (id + ".png"), merged);
      m.entries.push_back({id, Source::montgomery, Split::train, fs::absolute(img), fs::absolute(*l), fs::absolute(*r)});
    }
    check_orphans("montgomery", images, left, "masks_left");
    check_orphans("montgomery", images, right, "masks_right");
  }
  for (const Source src : {Source::shenzhen, Source::synthetic}) {
    const std::string name = to_string(src);
    const auto images = png_stems(raw_dir / name / "images");
    const auto masks = png_stems(raw_dir / name / "masks");
    for (const auto& [id, img] : images) {
      const fs::path* mk = find_mask(masks, id);
      if (!mk) {
        problems.push_back(name + "/" + id + ": missing masks/" + id + ".png");
        continue;
      }
      if (!claim(name, id) || !same_size(name, id, img, {*mk})) continue;
      m.entries.push_back({id, src, Split::train, fs::absolute(img), fs::absolute(*mk), {}});
    }
    check_orphans(name, images, masks, "masks");
  }

  if (!problems.empty()) {
    std::string msg = "prepare found " + std::to_string(problems.size()) + " problem(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    throw data_error(msg);
  }
  if (m.entries.empty())
    throw data_error("no samples found under " + raw_dir.string() +
                     " (expected montgomery/, shenzhen/ or synthetic/ subdirectories)");

  m = split(m, config.train_fraction, config.seed);
  save_manifest(m, manifest_path);
  std::map<Source, int> per_source;
  for (const auto& e : m.entries) ++per_source[e.source];
  log << "prepared " << m.entries.size() << " entries (";
  bool first = true;
  for (const auto& [s, n] : per_source) {
    log << (first ? "" : ", ") << to_string(s) << ' ' << n;
    first = false;
  }
  log << "; " << m.count(Split::train) << " train, " << m.count(Split::test) << " test) -> " << manifest_path.string()
      << '\n';
  return m;
}

std::string format_history(const std::vector<EpochRecord>& history) {
  std::string out = std::string(kHistoryHeader) + "\n";
  for (const auto& r : history)
    out += std::to_string(r.epoch) + "," + fixed(r.mean_loss, 8) + "," + fixed(r.val_dice_raw, 8) + "," +
           fixed(r.val_dice_post, 8) + "\n";
  return out;
}

TrainResult<float> cmd_train(const RunConfig& config, std::ostream& log) {
  if (config.manifest.empty()) throw usage_error("train needs a manifest (--manifest or paths.manifest)");
  config.validate();
  const DatasetManifest manifest = load_manifest(config.manifest);
  if (manifest.count(Split::train) == 0) throw data_error("manifest has no train entries: " + config.manifest.string());
  const UNetConfig model = config.model_config(all_synthetic(manifest));
  model.validate();
  ensure_dir(config.output);

  TrainingSetOptions opts;
  opts.height = model.input_h;
  opts.width = model.input_w;
  opts.augment_copies = config.augment_copies;
  opts.augment = config.augment;
  opts.lobes = config.lobes;
  const auto warn = warn_to(log);
  const auto train_set = build_sample_set(manifest, Split::train, opts, warn);
  const auto val_set = build_sample_set(manifest, Split::test, opts, warn);
  log << "training " << model.depth << "-level U-Net (base " << model.base_channels << ", input " << model.input_h
      << "x" << model.input_w << ") on " << train_set.size() << " samples, validating on " << val_set.size() << '\n';

  TrainCallbacks cb;
  cb.on_epoch = [&](const EpochRecord& r) {
    log << "epoch " << r.epoch << "/" << config.train.epochs << " loss " << fixed(r.mean_loss, 5) << " val dice raw "
        << fixed(r.val_dice_raw, 4) << " post " << fixed(r.val_dice_post, 4) << '\n';
    log.flush();
  };
  auto result = train(build_unet<float>(model, config.seed), train_set, val_set, config.train, config.post, cb);

  save_model(result.final_params, config.output / "model.segf");
  save_model(result.best_params, config.output / "best.segf");
  write_text(config.output / "history.csv", format_history(result.history));
  write_text(config.output / "config.txt", format_config(config));
  log << "saved " << (config.output / "model.segf").string() << " and best.segf (epoch " << result.best_epoch << ")\n";
  return result;
}

int cmd_infer(const RunConfig& config, const InferOptions& options, std::ostream& log) {
  if (config.model.empty()) throw usage_error("infer needs a model (--model or paths.model)");
  if (options.inputs.empty()) throw usage_error("infer needs at least one --input");
  config.post.validate();
  const auto params = load_model<float>(config.model);
  ensure_dir(config.output);
  const Predictor predictor = model_predictor(params);

  std::vector<fs::path> files;
  for (const auto& in : options.inputs) {
    if (fs::is_directory(in)) {
      for (const auto& [stem, p] : png_stems(in)) files.push_back(p);
    } else {
      files.push_back(in);
    }
  }
  int failures = 0;
  for (const auto& f : files) {
    try {
      const Image img = read_image_png(f);
      const Grid<float> prob = predictor(img);
      const auto masks = masks_from_probability(prob, img.height(), img.width(), config.post);
      const BinaryMask& chosen = config.postprocess ? masks.post : masks.raw;
      const std::string stem = f.stem().string();
      write_mask_png(config.output / (stem + "_mask.png"), chosen);
      Image overlay = img;
      const BinaryMask edge = boundary(chosen);
      for (std::size_t i = 0; i < edge.size(); ++i)
        if (edge[i]) overlay[i] = 1.0f;
      write_image_png(config.output / (stem + "_overlay.png"), overlay);
      if (options.save_raw) write_mask_png(config.output / (stem + "_raw.png"), masks.raw);
      if (options.save_prob) {
        const Image p = (prob.height() == img.height() && prob.width() == img.width())
                            ? prob
                            : resize_bilinear(prob, img.height(), img.width());
        write_image_png(config.output / (stem + "_prob.png"), p);
      }
      log << f.string() << " -> " << (config.output / (stem + "_mask.png")).string() << '\n';
    } catch (const Error& e) {
      ++failures;
      log << "error: " << f.string() << ": " << e.what() << '\n';
    }
  }
  return failures;
}

std::string format_report(const EvalResult& result, bool pooled) {
  std::string out = "stage,id,dice,iou\n";
  for (const EvalReport* r : {&result.raw, &result.post}) {
    const std::string stage = to_string(r->stage);
    for (const auto& s : r->samples) out += stage + "," + s.id + "," + fixed(s.dice, 9) + "," + fixed(s.iou, 9) + "\n";
    out += stage + ",*mean*," + fixed(r->mean_dice, 9) + "," + fixed(r->mean_iou, 9) + "\n";
    if (pooled) out += stage + ",*pooled*," + fixed(r->pooled_dice, 9) + "," + fixed(r->pooled_iou, 9) + "\n";
  }
  return out;
}

std::string format_summary(const EvalResult& result, bool pooled) {
  std::string out = "samples: " + std::to_string(result.raw.count) + "\n";
  for (const EvalReport* r : {&result.raw, &result.post}) {
    out += to_string(r->stage) + ": mean dice " + fixed(r->mean_dice, 4) + ", mean IoU " + fixed(r->mean_iou, 4);
    if (pooled) out += "; pooled dice " + fixed(r->pooled_dice, 4) + ", pooled IoU " + fixed(r->pooled_iou, 4);
    out += "\n";
  }
  return out;
}

EvalResult cmd_eval(const RunConfig& config, Split which, std::ostream& log) {
  if (config.model.empty()) throw usage_error("eval needs a model (--model or paths.model)");
  if (config.manifest.empty()) throw usage_error("eval needs a manifest (--manifest or paths.manifest)");
  config.post.validate();
  const auto params = load_model<float>(config.model);
  const DatasetManifest manifest = load_manifest(config.manifest);
  if (manifest.count(which) == 0)
    throw data_error("manifest has no " + to_string(which) + " entries: " + config.manifest.string());
  ensure_dir(config.output);

  std::vector<Sample> samples;
  const auto warn = warn_to(log);
  for (const auto& e : manifest.entries)
    if (e.split == which) samples.push_back(load_sample(manifest, e, config.lobes, warn));
  const EvalResult result = evaluate(samples, model_predictor(params), config.post);
  write_text(config.output / "report.csv", format_report(result, config.pooled));
  const std::string summary = format_summary(result, config.pooled);
  write_text(config.output / "summary.txt", summary);
  log << summary;
  return result;
}

}  // namespace segforge::cli
