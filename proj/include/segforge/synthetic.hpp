#pragma once
// Desk-scale stand-in for chest radiographs: two dark elliptical "lungs" on a
// brighter body with an intensity gradient, rib-like sinusoidal stripes,
// a few small dark distractor blobs and pixel noise. The ground-truth mask is
// the union of the two ellipses.

#include <cstdint>
#include <filesystem>

#include "segforge/dataset.hpp"

namespace segforge {

struct SyntheticOptions {
  int count = 40;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
};

// Deterministic in (seed, index, size).
Sample render_synthetic(std::uint64_t seed, int index, int height, int width);

// Writes <out>/synthetic/{images,masks}/<id>.png and <out>/manifest.tsv.
DatasetManifest generate_synthetic(const std::filesystem::path& out_dir, const SyntheticOptions& options);

std::string synthetic_id(int index);

}  // namespace segforge
