#pragma once
// Dataset manifests and sample loading.
//
// Manifest format, one record per line, tab separated:
//   id  source  split  image_path  mask_path  [mask2_path]
// Lines starting with '#' and blank lines are ignored. Montgomery records
// carry two mask paths (left lobe, right lobe); all others carry one.
// Relative paths resolve against the manifest's directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "segforge/image.hpp"
#include "segforge/morphology.hpp"
#include "segforge/png_io.hpp"

namespace segforge {

enum class Source { montgomery, shenzhen, synthetic };
enum class Split { train, test };

std::string to_string(Source s);
std::string to_string(Split s);
Source parse_source(const std::string& s);
Split parse_split(const std::string& s);

struct ManifestEntry {
  std::string id;
  Source source = Source::synthetic;
  Split split = Split::train;
  std::filesystem::path image;
  std::filesystem::path mask;   // merged mask, or the left lobe for Montgomery
  std::filesystem::path mask2;  // right lobe; empty unless Montgomery

  bool has_lobes() const { return !mask2.empty(); }
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::size_t count(Split s) const;
  std::vector<ManifestEntry> select(Split s) const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const std::string& origin = "<manifest>");

// Parses and validates; every referenced file must exist.
DatasetManifest load_manifest(const std::filesystem::path& path);

// Paths inside base_dir are written relative to it.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Stratified by source: each source contributes round(fraction * n_source)
// training entries, adjusted by largest remainder so the overall count is
// round(fraction * n). Reproducible from the seed.
DatasetManifest split(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed);

struct LobeMergeConfig {
  int se_size = 5;
  int iterations = 1;
};

// dilate(left ∪ right)
BinaryMask merge_lobes(const BinaryMask& left, const BinaryMask& right, const StructuringElement& se,
                       int iterations = 1);
BinaryMask merge_lobes(const BinaryMask& left, const BinaryMask& right, const LobeMergeConfig& cfg);

struct Sample {
  std::string id;
  Image image;       // [0, 1]
  BinaryMask mask;   // same shape as image
};

void validate_sample(const Sample& s);

// Loads image and mask; Montgomery lobes are merged.
Sample load_sample(const DatasetManifest& manifest, const ManifestEntry& entry,
                   const LobeMergeConfig& lobes = {}, const WarningSink& warn = {});

// Bilinear image, nearest-neighbor mask.
Sample resize_sample(const Sample& s, int h, int w);

}  // namespace segforge
