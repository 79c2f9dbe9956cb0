#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "segforge/dataset.hpp"

namespace segforge {

struct AugmentConfig {
  bool rotate = true;
  bool zoom = true;
  bool crop = true;
  double rotate_max_deg = 10.0;
  double zoom_min = 0.9;
  double zoom_max = 1.1;
  double crop_fraction = 0.9;
  std::uint64_t seed = 0;

  bool any_enabled() const { return rotate || zoom || crop; }
  void validate() const;
};

// A drawn geometric transform: crop window, then rotation and zoom about
// the window center. Output size is the crop size.
struct GeometricTransform {
  double angle_deg = 0.0;
  double zoom = 1.0;
  int crop_y = 0;
  int crop_x = 0;
  int crop_h = 0;
  int crop_w = 0;
};

inline constexpr int kMinCropSide = 8;

GeometricTransform draw_transform(const AugmentConfig& config, int h, int w, std::mt19937_64& rng);

// Bilinear resampling; samples outside the source are 0.
Image apply_transform(const Image& img, const GeometricTransform& t);
// Same resampling on the {0,1} mask, re-binarized at >= 0.5.
BinaryMask apply_transform(const BinaryMask& m, const GeometricTransform& t);

// Same transform on image and mask. Returns the sample unchanged when every
// transform is disabled.
Sample augment(const Sample& sample, const AugmentConfig& config, std::mt19937_64& rng);

// Per-(sample, copy) random stream so augmentation is independent of order.
std::mt19937_64 augment_stream(std::uint64_t seed, std::uint64_t sample_index, std::uint64_t copy);

struct TrainingSetOptions {
  int height = 64;
  int width = 64;
  int augment_copies = 3;
  AugmentConfig augment;
  LobeMergeConfig lobes;
};

// Loads every entry of the requested split at the target size. For the
// training split, each original is followed by `augment_copies` augmented
// copies (when augmentation is enabled).
std::vector<Sample> build_sample_set(const DatasetManifest& manifest, Split which,
                                     const TrainingSetOptions& options, const WarningSink& warn = {});

}  // namespace segforge
