#pragma once
// U-Net: encoder blocks of repeated same-padded convolutions with 2x2 max
// pooling between levels, a bottleneck, and decoder blocks that upsample
// (nearest x2 followed by a conv), concatenate the matching encoder map,
// and convolve again. A final 1x1 conv feeds a sigmoid.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segforge/autodiff.hpp"
#include "segforge/tensor.hpp"

namespace segforge {

struct UNetConfig {
  int depth = 4;
  int base_channels = 64;
  int convs_per_block = 2;
  int kernel_size = 3;
  int in_channels = 1;
  int out_channels = 1;
  int input_h = 512;
  int input_w = 512;

  // Full-scale layout of the original U-Net on 512x512 inputs.
  static UNetConfig full_scale() { return UNetConfig{}; }
  // Desk-scale layout used by tests and synthetic runs.
  static UNetConfig desk_scale() { return UNetConfig{3, 16, 2, 3, 1, 1, 64, 64}; }

  int channels_at(int level) const { return base_channels << level; }

  // Empty when valid, otherwise one line per violated constraint.
  std::vector<std::string> violations() const;
  // Throws usage Error listing violations.
  void validate() const;

  bool operator==(const UNetConfig&) const = default;
};

struct ConvSpec {
  std::string name;  // parameter prefix; weight is name + ".weight", bias name + ".bias"
  int in_channels;
  int out_channels;
  int kernel;
  bool relu;  // false only for the head
};

// Every convolution in execution order, derived from the config alone.
std::vector<ConvSpec> layer_plan(const UNetConfig& config);

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;
};

template <typename T>
struct ModelParams {
  UNetConfig config;
  // weight, bias pairs in layer_plan order
  std::vector<NamedTensor<T>> entries;

  const Tensor<T>& at(const std::string& name) const;
  Tensor<T>& at(const std::string& name);
  std::int64_t parameter_count() const;

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out{config, {}};
    for (const auto& e : entries) out.entries.push_back({e.name, e.value.template cast<U>()});
    return out;
  }
};

// He-initialized weights (std = sqrt(2 / fan_in)), zero biases.
template <typename T>
ModelParams<T> build_unet(const UNetConfig& config, std::uint64_t seed);

// Forward pass on a tape. `params` must hold one Var per entry of the
// model, in order. x: (n, in_channels, h, w) with h, w divisible by 2^depth.
template <typename T>
ad::Var<T> unet_forward(const UNetConfig& config, const std::vector<ad::Var<T>>& params,
                        ad::Var<T> x);

// Puts every parameter on the tape as a leaf.
template <typename T>
std::vector<ad::Var<T>> attach(ad::Tape<T>& tape, const ModelParams<T>& params,
                               bool requires_grad);

// Gradient-free forward; returns per-pixel probabilities (n, 1, h, w).
template <typename T>
Tensor<T> predict(const ModelParams<T>& params, const Tensor<T>& x);

// Binary model file: "SEGF", version, config, then named parameter records.
// Values are stored little-endian in the precision of T.
template <typename T>
void save_model(const ModelParams<T>& params, const std::filesystem::path& path);

// Accepts files written in either precision; values are converted to T.
template <typename T>
ModelParams<T> load_model(const std::filesystem::path& path);

inline constexpr std::uint32_t kModelFormatVersion = 1;

}  // namespace segforge
