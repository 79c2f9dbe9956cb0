#include <CLI11.hpp>

#include <memory>
#include <ostream>

#include "segforge/cli.hpp"

namespace segforge::cli {
namespace {

// A flag that writes one config key. Value flags forward their argument;
// switch flags write a fixed value.
struct FlagBinding {
  std::string flag;
  std::string key;
  std::string fixed_value;  // empty for value flags
  CLI::Option* option = nullptr;
  std::string value;
};

class Bindings {
 public:
  explicit Bindings(CLI::App* app) : app_(app) {}

  void value(const std::string& flag, const std::string& key, const std::string& help) {
    auto& b = add(flag, key, {});
    b.option = app_->add_option(flag, b.value, help);
  }
  void toggle(const std::string& flag, const std::string& key, const std::string& fixed, const std::string& help) {
    auto& b = add(flag, key, fixed);
    b.option = app_->add_flag(flag, help);
  }
  // Flags apply in declaration order after the config file.
  void apply(RunConfig& config) const {
    for (const auto& ptr : bindings_) {
      const FlagBinding& b = *ptr;
      if (b.option->count() == 0) continue;
      const std::string& v = b.fixed_value.empty() ? b.value : b.fixed_value;
      try {
        apply_setting(config, b.key, v);
      } catch (const Error& e) {
        throw usage_error(b.flag + ": " + e.what());
      }
    }
  }

 private:
  FlagBinding& add(const std::string& flag, const std::string& key, const std::string& fixed) {
    bindings_.push_back(std::make_unique<FlagBinding>(FlagBinding{flag, key, fixed, nullptr, {}}));
    return *bindings_.back();
  }

  CLI::App* app_;
  std::vector<std::unique_ptr<FlagBinding>> bindings_;
};

void common_flags(Bindings& b) {
  b.value("--seed", "run.seed", "seed for every stochastic component");
  b.value("--out", "paths.output", "output directory");
}

void model_flags(Bindings& b) {
  b.value("--profile", "model.profile", "model layout: auto, desk or full");
  b.value("--depth", "model.depth", "encoder levels");
  b.value("--base-channels", "model.base_channels", "channels at the first level");
  b.value("--convs-per-block", "model.convs_per_block", "convolutions per block");
  b.value("--kernel-size", "model.kernel_size", "odd convolution kernel side");
  b.value("--input-height", "model.input_h", "network input height");
  b.value("--input-width", "model.input_w", "network input width");
}

void train_flags(Bindings& b) {
  b.value("--epochs", "train.epochs", "training epochs");
  b.value("--batch-size", "train.batch_size", "samples per Adam step");
  b.value("--lr", "train.learning_rate", "Adam learning rate");
  b.value("--beta1", "train.beta1", "Adam beta1");
  b.value("--beta2", "train.beta2", "Adam beta2");
  b.value("--adam-eps", "train.eps", "Adam epsilon");
  b.value("--loss", "train.loss", "bce, soft_dice or bce_plus_dice");
  b.value("--augment-copies", "augment.copies", "augmented copies per training image");
  b.toggle("--no-rotate", "augment.rotate", "false", "disable random rotation");
  b.toggle("--no-zoom", "augment.zoom", "false", "disable random zoom");
  b.toggle("--no-crop", "augment.crop", "false", "disable random crop");
  b.value("--rotate-max-deg", "augment.rotate_max_deg", "largest rotation in degrees");
  b.value("--zoom-min", "augment.zoom_min", "smallest zoom factor");
  b.value("--zoom-max", "augment.zoom_max", "largest zoom factor");
  b.value("--crop-fraction", "augment.crop_fraction", "crop side as a fraction of the image");
}

void lobe_flags(Bindings& b) {
  b.value("--lobe-se-size", "lobes.se_size", "square SE side for lobe merging");
  b.value("--lobe-iterations", "lobes.iterations", "dilation iterations for lobe merging");
}

void postprocess_flags(Bindings& b) {
  b.value("--threshold", "postprocess.threshold", "binarization threshold");
  b.value("--pipeline", "postprocess.pipeline", "morphology steps, e.g. open:3:1,close:3:1 or none");
  b.value("--keep-largest", "postprocess.keep_largest", "connected components kept (0 keeps all)");
}

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<Bindings> bindings;
  std::unique_ptr<std::string> config_file = std::make_unique<std::string>();
};

Command make_command(CLI::App& root, const std::string& name, const std::string& help) {
  Command c;
  c.app = root.add_subcommand(name, help);
  c.bindings = std::make_unique<Bindings>(c.app);
  c.app->add_option("--config", *c.config_file, "config file of section.key = value lines");
  return c;
}

RunConfig resolve(const Command& c) {
  RunConfig config;
  if (!c.config_file->empty()) apply_config_file(config, *c.config_file);
  c.bindings->apply(config);
  config.propagate_seed();
  return config;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App root{"segforge: U-Net lung segmentation from scratch", "segforge"};
  root.require_subcommand(1);

  Command synth = make_command(root, "synth", "generate a synthetic dataset and manifest");
  SynthOptions synth_opts;
  int synth_size = 0;
  synth.app->add_option("--count", synth_opts.count, "number of samples")->check(CLI::PositiveNumber);
  synth.app->add_option("--size", synth_size, "image side (sets height and width)")->check(CLI::PositiveNumber);
  synth.app->add_option("--height", synth_opts.height, "image height")->check(CLI::PositiveNumber);
  synth.app->add_option("--width", synth_opts.width, "image width")->check(CLI::PositiveNumber);
  common_flags(*synth.bindings);
  synth.bindings->value("--train-fraction", "data.train_fraction", "fraction of samples in the train split");

  Command prepare = make_command(root, "prepare", "build a manifest from a raw dataset directory");
  std::string raw_dir;
  prepare.app->add_option("--raw", raw_dir, "raw dataset root (montgomery/, shenzhen/, synthetic/)")->required();
  common_flags(*prepare.bindings);
  prepare.bindings->value("--manifest", "paths.manifest", "manifest path (default <out>/manifest.tsv)");
  prepare.bindings->value("--train-fraction", "data.train_fraction", "fraction of entries in the train split");
  lobe_flags(*prepare.bindings);

  Command train_cmd = make_command(root, "train", "train a U-Net from a manifest");
  common_flags(*train_cmd.bindings);
  train_cmd.bindings->value("--manifest", "paths.manifest", "dataset manifest");
  model_flags(*train_cmd.bindings);
  train_flags(*train_cmd.bindings);
  lobe_flags(*train_cmd.bindings);
  postprocess_flags(*train_cmd.bindings);

  Command infer = make_command(root, "infer", "segment images with a trained model");
  InferOptions infer_opts;
  std::vector<std::string> infer_inputs;
  infer.app->add_option("--input", infer_inputs, "PNG files or directories")->expected(1, -1);
  infer.app->add_flag("--save-prob", infer_opts.save_prob, "also write the probability map");
  infer.app->add_flag("--save-raw", infer_opts.save_raw, "also write the thresholded mask before postprocessing");
  common_flags(*infer.bindings);
  infer.bindings->value("--model", "paths.model", "model file");
  infer.bindings->toggle("--no-postprocess", "postprocess.enabled", "false", "write the thresholded mask only");
  postprocess_flags(*infer.bindings);

  Command eval = make_command(root, "eval", "score a model on a manifest split");
  std::string eval_split = "test";
  eval.app->add_option("--split", eval_split, "split to evaluate (train or test)");
  common_flags(*eval.bindings);
  eval.bindings->value("--model", "paths.model", "model file");
  eval.bindings->value("--manifest", "paths.manifest", "dataset manifest");
  eval.bindings->toggle("--pooled", "eval.pooled", "true", "also report dice pooled over all pixels");
  lobe_flags(*eval.bindings);
  postprocess_flags(*eval.bindings);

  try {
    root.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = root.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth.app->parsed()) {
      RunConfig config = resolve(synth);
      if (synth_size > 0) synth_opts.height = synth_opts.width = synth_size;
      config.validate();
      cmd_synth(config, synth_opts, out);
    } else if (prepare.app->parsed()) {
      RunConfig config = resolve(prepare);
      config.validate();
      cmd_prepare(config, raw_dir, out);
    } else if (train_cmd.app->parsed()) {
      cmd_train(resolve(train_cmd), err);
    } else if (infer.app->parsed()) {
      RunConfig config = resolve(infer);
      for (const auto& s : infer_inputs) infer_opts.inputs.emplace_back(s);
      const int failed = cmd_infer(config, infer_opts, out);
      if (failed > 0) {
        err << "segforge: " << failed << " input(s) failed\n";
        return kExitData;
      }
    } else if (eval.app->parsed()) {
      Split which;
      try {
        which = parse_split(eval_split);
      } catch (const Error& e) {
        throw usage_error(std::string("--split: ") + e.what());
      }
      cmd_eval(resolve(eval), which, out);
    }
  } catch (const Error& e) {
    err << "segforge: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    err << "segforge: out of memory\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "segforge: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace segforge::cli
