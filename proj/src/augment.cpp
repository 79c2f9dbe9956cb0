#include "segforge/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace segforge {

void AugmentConfig::validate() const {
  if (!(rotate_max_deg >= 0.0)) throw usage_error("augment rotate_max_deg must be >= 0");
  if (!(zoom_min > 0.0 && zoom_max > 0.0)) throw usage_error("augment zoom bounds must be positive");
  if (zoom_min > zoom_max) throw usage_error("augment zoom_min must be <= zoom_max");
  if (!(crop_fraction > 0.0 && crop_fraction <= 1.0)) throw usage_error("augment crop_fraction must lie in (0,1]");
}

GeometricTransform draw_transform(const AugmentConfig& config, int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GeometricTransform t;
  t.crop_h = h;
  t.crop_w = w;
  if (config.rotate) t.angle_deg = (2.0 * unit(rng) - 1.0) * config.rotate_max_deg;
  if (config.zoom) t.zoom = config.zoom_min + unit(rng) * (config.zoom_max - config.zoom_min);
  if (config.crop) {
    auto side = [&](int full) {
      const int s = static_cast<int>(std::lround(config.crop_fraction * full));
      return std::min(full, std::max(s, std::min(full, kMinCropSide)));
    };
    t.crop_h = side(h);
    t.crop_w = side(w);
    t.crop_y = static_cast<int>(std::floor(unit(rng) * (h - t.crop_h + 1)));
    t.crop_x = static_cast<int>(std::floor(unit(rng) * (w - t.crop_w + 1)));
    t.crop_y = std::clamp(t.crop_y, 0, h - t.crop_h);
    t.crop_x = std::clamp(t.crop_x, 0, w - t.crop_w);
  }
  return t;
}

namespace {

Grid<float> resample(const Grid<float>& src, const GeometricTransform& t) {
  Grid<float> out(t.crop_h, t.crop_w);
  const double rad = t.angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cy = (t.crop_h - 1) / 2.0, cx = (t.crop_w - 1) / 2.0;
  auto tap = [&](int y, int x) -> float {
    if (y < 0 || y >= src.height() || x < 0 || x >= src.width()) return 0.0f;
    return src.at(y, x);
  };
  for (int y = 0; y < t.crop_h; ++y)
    for (int x = 0; x < t.crop_w; ++x) {
      // inverse map: undo zoom and rotation about the window center
      const double dy = y - cy, dx = x - cx;
      const double sy = t.crop_y + cy + (c * dy + s * dx) / t.zoom;
      const double sx = t.crop_x + cx + (-s * dy + c * dx) / t.zoom;
      const double fy0 = std::floor(sy), fx0 = std::floor(sx);
      const int y0 = static_cast<int>(fy0), x0 = static_cast<int>(fx0);
      const auto fy = static_cast<float>(sy - fy0), fx = static_cast<float>(sx - fx0);
      const float a = tap(y0, x0), b = tap(y0, x0 + 1);
      const float d = tap(y0 + 1, x0), e = tap(y0 + 1, x0 + 1);
      const float top = a + fx * (b - a);
      const float bot = d + fx * (e - d);
      out.at(y, x) = top + fy * (bot - top);
    }
  return out;
}

}  // namespace

Image apply_transform(const Image& img, const GeometricTransform& t) { return resample(img, t); }

BinaryMask apply_transform(const BinaryMask& m, const GeometricTransform& t) {
  Grid<float> f(m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i) f[i] = m[i] ? 1.0f : 0.0f;
  const Grid<float> r = resample(f, t);
  BinaryMask out(r.height(), r.width());
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x) out.set(y, x, r.at(y, x) >= 0.5f);
  return out;
}

Sample augment(const Sample& sample, const AugmentConfig& config, std::mt19937_64& rng) {
  validate_sample(sample);
  if (!config.any_enabled()) return sample;
  config.validate();
  const auto t = draw_transform(config, sample.image.height(), sample.image.width(), rng);
  return Sample{sample.id, apply_transform(sample.image, t), apply_transform(sample.mask, t)};
}

std::mt19937_64 augment_stream(std::uint64_t seed, std::uint64_t sample_index, std::uint64_t copy) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sample_index), static_cast<std::uint32_t>(copy), 0x5e6fu};
  return std::mt19937_64(seq);
}

std::vector<Sample> build_sample_set(const DatasetManifest& manifest, Split which,
                                     const TrainingSetOptions& options, const WarningSink& warn) {
  if (options.augment_copies < 0) throw usage_error("augment copies must be >= 0");
  std::vector<Sample> out;
  std::uint64_t index = 0;
  for (const auto& entry : manifest.entries) {
    if (entry.split != which) continue;
    const Sample original = load_sample(manifest, entry, options.lobes, warn);
    out.push_back(resize_sample(original, options.height, options.width));
    if (which == Split::train && options.augment.any_enabled()) {
      for (int c = 0; c < options.augment_copies; ++c) {
        auto rng = augment_stream(options.augment.seed, index, static_cast<std::uint64_t>(c));
        Sample a = augment(original, options.augment, rng);
        a.id = original.id + "#aug" + std::to_string(c);
        out.push_back(resize_sample(a, options.height, options.width));
      }
    }
    ++index;
  }
  return out;
}

}  // namespace segforge
