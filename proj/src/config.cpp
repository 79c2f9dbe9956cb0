#include "segforge/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace segforge {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || value.empty())
    throw usage_error("invalid value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw usage_error("invalid boolean '" + value + "' for " + key);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

std::string profile_name(ModelProfile p) {
  switch (p) {
    case ModelProfile::automatic: return "auto";
    case ModelProfile::desk: return "desk";
    case ModelProfile::full: return "full";
  }
  return "auto";
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Setting {
  SettingInfo info;
  Setter set;
  Getter get;
};

template <typename T>
Setting number(const char* key, const char* help, T RunConfig::*field) {
  return {{key, help},
          [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<T>(k, v); },
          [field](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*field);
            else return std::to_string(c.*field);
          }};
}

Setting optional_int(const char* key, const char* help, std::optional<int> RunConfig::*field) {
  return {{key, help},
          [field](RunConfig& c, const std::string& k, const std::string& v) {
            if (v == "auto") c.*field = std::nullopt;
            else c.*field = parse_number<int>(k, v);
          },
          [field](const RunConfig& c) { return (c.*field) ? std::to_string(*(c.*field)) : std::string("auto"); }};
}

template <typename Owner, typename T>
Setting nested_number(const char* key, const char* help, Owner RunConfig::*owner, T Owner::*field) {
  return {{key, help},
          [owner, field](RunConfig& c, const std::string& k, const std::string& v) {
            (c.*owner).*field = parse_number<T>(k, v);
          },
          [owner, field](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt((c.*owner).*field);
            else return std::to_string((c.*owner).*field);
          }};
}

template <typename Owner>
Setting nested_bool(const char* key, const char* help, Owner RunConfig::*owner, bool Owner::*field) {
  return {{key, help},
          [owner, field](RunConfig& c, const std::string& k, const std::string& v) {
            (c.*owner).*field = parse_bool(k, v);
          },
          [owner, field](const RunConfig& c) { return fmt_bool((c.*owner).*field); }};
}

Setting path(const char* key, const char* help, std::filesystem::path RunConfig::*field) {
  return {{key, help},
          [field](RunConfig& c, const std::string&, const std::string& v) { c.*field = v; },
          [field](const RunConfig& c) { return (c.*field).string(); }};
}

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = [] {
    std::vector<Setting> t;
    t.push_back({{"model.profile", "auto | desk | full"},
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   if (v == "auto") c.profile = ModelProfile::automatic;
                   else if (v == "desk") c.profile = ModelProfile::desk;
                   else if (v == "full") c.profile = ModelProfile::full;
                   else throw usage_error("invalid value '" + v + "' for " + k + " (expected auto|desk|full)");
                 },
                 [](const RunConfig& c) { return profile_name(c.profile); }});
    t.push_back(optional_int("model.depth", "encoder levels", &RunConfig::depth));
    t.push_back(optional_int("model.base_channels", "channels at the first level", &RunConfig::base_channels));
    t.push_back(optional_int("model.convs_per_block", "convolutions per block", &RunConfig::convs_per_block));
    t.push_back(optional_int("model.kernel_size", "odd convolution kernel side", &RunConfig::kernel_size));
    t.push_back(optional_int("model.input_h", "network input height", &RunConfig::input_h));
    t.push_back(optional_int("model.input_w", "network input width", &RunConfig::input_w));

    t.push_back(nested_number("train.epochs", "training epochs", &RunConfig::train, &TrainConfig::epochs));
    t.push_back(nested_number("train.batch_size", "samples per step", &RunConfig::train, &TrainConfig::batch_size));
    t.push_back(nested_number("train.learning_rate", "Adam step size", &RunConfig::train, &TrainConfig::learning_rate));
    t.push_back(nested_number("train.beta1", "Adam first-moment decay", &RunConfig::train, &TrainConfig::adam_beta1));
    t.push_back(nested_number("train.beta2", "Adam second-moment decay", &RunConfig::train, &TrainConfig::adam_beta2));
    t.push_back(nested_number("train.eps", "Adam epsilon", &RunConfig::train, &TrainConfig::adam_eps));
    t.push_back({{"train.loss", "bce | soft_dice | bce_plus_dice"},
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   try {
                     c.train.loss = parse_loss_kind(v);
                   } catch (const Error& e) {
                     throw usage_error(k + ": " + e.what());
                   }
                 },
                 [](const RunConfig& c) { return to_string(c.train.loss); }});

    t.push_back(nested_bool("augment.rotate", "random rotation", &RunConfig::augment, &AugmentConfig::rotate));
    t.push_back(nested_bool("augment.zoom", "random zoom", &RunConfig::augment, &AugmentConfig::zoom));
    t.push_back(nested_bool("augment.crop", "random crop", &RunConfig::augment, &AugmentConfig::crop));
    t.push_back(nested_number("augment.rotate_max_deg", "max rotation in degrees", &RunConfig::augment,
                              &AugmentConfig::rotate_max_deg));
    t.push_back(nested_number("augment.zoom_min", "smallest zoom factor", &RunConfig::augment, &AugmentConfig::zoom_min));
    t.push_back(nested_number("augment.zoom_max", "largest zoom factor", &RunConfig::augment, &AugmentConfig::zoom_max));
    t.push_back(nested_number("augment.crop_fraction", "crop side as a fraction of the image", &RunConfig::augment,
                              &AugmentConfig::crop_fraction));
    t.push_back(number("augment.copies", "augmented copies per training image", &RunConfig::augment_copies));

    t.push_back(nested_number("lobes.se_size", "square SE side for lobe merging", &RunConfig::lobes,
                              &LobeMergeConfig::se_size));
    t.push_back(nested_number("lobes.iterations", "dilation iterations for lobe merging", &RunConfig::lobes,
                              &LobeMergeConfig::iterations));

    t.push_back(nested_number("postprocess.threshold", "binarization threshold", &RunConfig::post,
                              &PostprocessConfig::threshold));
    t.push_back({{"postprocess.pipeline", "morphology steps, e.g. open:3:1,close:3:1 (or none)"},
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   try {
                     c.post.pipeline = parse_pipeline(v);
                   } catch (const Error& e) {
                     throw usage_error(k + ": " + e.what());
                   }
                 },
                 [](const RunConfig& c) { return format_pipeline(c.post.pipeline); }});
    t.push_back(nested_number("postprocess.keep_largest", "components kept (0 = all)", &RunConfig::post,
                              &PostprocessConfig::keep_largest));
    t.push_back({{"postprocess.enabled", "apply postprocessing in infer"},
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.postprocess = parse_bool(k, v); },
                 [](const RunConfig& c) { return fmt_bool(c.postprocess); }});

    t.push_back(number("data.train_fraction", "fraction of entries in the train split", &RunConfig::train_fraction));
    t.push_back(number("run.seed", "seed for every stochastic component", &RunConfig::seed));
    t.push_back({{"eval.pooled", "also report dice pooled over all pixels"},
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.pooled = parse_bool(k, v); },
                 [](const RunConfig& c) { return fmt_bool(c.pooled); }});

    t.push_back(path("paths.manifest", "dataset manifest", &RunConfig::manifest));
    t.push_back(path("paths.model", "model file", &RunConfig::model));
    t.push_back(path("paths.output", "output directory", &RunConfig::output));
    return t;
  }();
  return table;
}

}  // namespace

UNetConfig RunConfig::model_config(bool all_synthetic) const {
  UNetConfig c;
  switch (profile) {
    case ModelProfile::automatic: c = all_synthetic ? UNetConfig::desk_scale() : UNetConfig::full_scale(); break;
    case ModelProfile::desk: c = UNetConfig::desk_scale(); break;
    case ModelProfile::full: c = UNetConfig::full_scale(); break;
  }
  if (depth) c.depth = *depth;
  if (base_channels) c.base_channels = *base_channels;
  if (convs_per_block) c.convs_per_block = *convs_per_block;
  if (kernel_size) c.kernel_size = *kernel_size;
  if (input_h) c.input_h = *input_h;
  if (input_w) c.input_w = *input_w;
  return c;
}

void RunConfig::propagate_seed() {
  train.seed = seed;
  augment.seed = seed;
}

void RunConfig::validate() const {
  train.validate();
  augment.validate();
  post.validate();
  if (augment_copies < 0) throw usage_error("augment.copies must be >= 0");
  if (lobes.se_size < 1 || lobes.se_size % 2 == 0) throw usage_error("lobes.se_size must be odd and >= 1");
  if (lobes.iterations < 0) throw usage_error("lobes.iterations must be >= 0");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw usage_error("data.train_fraction must lie in [0,1]");
}

const std::vector<SettingInfo>& setting_keys() {
  static const std::vector<SettingInfo> keys = [] {
    std::vector<SettingInfo> k;
    for (const auto& s : settings()) k.push_back(s.info);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& s : settings())
    if (key == s.info.key) {
      s.set(config, key, trim(value));
      return;
    }
  throw usage_error("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::istream& in, const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw usage_error(origin + ":" + std::to_string(lineno) + ": expected 'section.key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.find('.') == std::string::npos)
      throw usage_error(origin + ":" + std::to_string(lineno) + ": key '" + key + "' has no section");
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot open config file: " + path.string());
  for (const auto& [key, value] : parse_config_text(in, path.string())) {
    try {
      apply_setting(config, key, value);
    } catch (const Error& e) {
      throw usage_error(path.string() + ": " + e.what());
    }
  }
}

std::string format_config(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& s : settings()) out << s.info.key << " = " << s.get(config) << '\n';
  return out.str();
}

}  // namespace segforge
