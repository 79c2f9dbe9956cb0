#pragma once
// Run configuration shared by every CLI command.
//
// Config files hold flat `section.key = value` lines; '#' starts a comment.
// Settings are applied in order: built-in defaults, then the config file,
// then command-line flags.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "segforge/augment.hpp"
#include "segforge/morphology.hpp"
#include "segforge/optim.hpp"
#include "segforge/unet.hpp"

namespace segforge {

// auto: desk-scale when every manifest entry is synthetic, otherwise the
// full-scale layout. Explicit model.* settings override the profile.
enum class ModelProfile { automatic, desk, full };

struct RunConfig {
  ModelProfile profile = ModelProfile::automatic;
  // model.* overrides applied on top of the profile
  std::optional<int> depth, base_channels, convs_per_block, kernel_size, input_h, input_w;

  TrainConfig train;
  AugmentConfig augment;
  int augment_copies = 3;
  LobeMergeConfig lobes;
  PostprocessConfig post;
  bool postprocess = true;
  bool pooled = false;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  std::filesystem::path manifest;
  std::filesystem::path model;
  std::filesystem::path output;

  // Resolved network layout for a dataset (all_synthetic selects the auto profile).
  UNetConfig model_config(bool all_synthetic) const;
  // Pushes the global seed into every stochastic component.
  void propagate_seed();
  void validate() const;
};

struct SettingInfo {
  const char* key;
  const char* help;
};

// Every recognised key, in documentation order.
const std::vector<SettingInfo>& setting_keys();

// Throws usage Error for unknown keys or unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// Parsed `key = value` pairs in file order; errors carry `origin:line`.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::istream& in, const std::string& origin);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

// Round-trips through apply_setting.
std::string format_config(const RunConfig& config);

}  // namespace segforge
