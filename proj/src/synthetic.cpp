#include "segforge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <system_error>

namespace segforge {
namespace {

struct Ellipse {
  double cy, cx, ry, rx, angle;

  bool contains(double y, double x) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double dy = y - cy, dx = x - cx;
    const double u = (c * dx + s * dy) / rx;
    const double v = (-s * dx + c * dy) / ry;
    return u * u + v * v <= 1.0;
  }
};

BinaryMask rasterize(const Ellipse& e, int h, int w) {
  BinaryMask m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(y, x, e.contains(y, x));
  return m;
}

bool touches_border(const BinaryMask& m) {
  for (int x = 0; x < m.width(); ++x)
    if (m.get(0, x) || m.get(m.height() - 1, x)) return true;
  for (int y = 0; y < m.height(); ++y)
    if (m.get(y, 0) || m.get(y, m.width() - 1)) return true;
  return false;
}

}  // namespace

std::string synthetic_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth_%04d", index);
  return buf;
}

Sample render_synthetic(std::uint64_t seed, int index, int h, int w) {
  if (h < 16 || w < 16) throw usage_error("synthetic images must be at least 16x16");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x51u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const double deg = std::numbers::pi / 180.0;

  BinaryMask mask;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100) throw runtime_error("synthetic: could not place two separated lungs");
    const double cy = h * uniform(0.44, 0.54);
    const Ellipse left{cy + h * uniform(-0.03, 0.03), w * uniform(0.27, 0.33), h * uniform(0.24, 0.32),
                       w * uniform(0.10, 0.14), uniform(-8.0, 8.0) * deg};
    const Ellipse right{cy + h * uniform(-0.03, 0.03), w * uniform(0.67, 0.73), h * uniform(0.24, 0.32),
                        w * uniform(0.10, 0.14), uniform(-8.0, 8.0) * deg};
    const BinaryMask a = rasterize(left, h, w);
    const BinaryMask b = rasterize(right, h, w);
    // keep a gap so the lungs stay separate under 8-connectivity
    if (mask_intersection(dilate(a, StructuringElement::square(5)), b).count() != 0) continue;
    mask = mask_union(a, b);
    if (touches_border(mask) || a.count() == 0 || b.count() == 0) continue;
    if (connected_components(mask).count() != 2) continue;
    break;
  }

  const double body = uniform(0.55, 0.7);
  const double grad_y = uniform(-0.12, 0.12), grad_x = uniform(-0.08, 0.08);
  const double lung = uniform(0.18, 0.3);
  const double rib_amp = uniform(0.05, 0.09);
  const double rib_period = h * uniform(0.09, 0.13);
  const double rib_phase = uniform(0.0, 2.0 * std::numbers::pi);
  const double rib_bend = uniform(0.6, 1.2);
  std::normal_distribution<double> noise(0.0, 0.035);

  // distractors: small dark blobs outside the lungs
  struct Blob {
    double cy, cx, r;
  };
  std::vector<Blob> blobs;
  const int n_blobs = static_cast<int>(uniform(0.0, 3.0));
  const BinaryMask keep_out = dilate(mask, StructuringElement::square(7));
  for (int i = 0, tries = 0; i < n_blobs && tries < 50; ++tries) {
    const Blob bl{uniform(2.0, h - 3.0), uniform(2.0, w - 3.0), uniform(1.0, 2.2)};
    if (keep_out.get(static_cast<int>(bl.cy), static_cast<int>(bl.cx))) continue;
    blobs.push_back(bl);
    ++i;
  }

  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double ny = (y - h / 2.0) / h, nx = (x - w / 2.0) / w;
      double v = body + grad_y * ny + grad_x * nx;
      if (mask.get(y, x)) v = lung + 0.5 * grad_y * ny;
      for (const auto& bl : blobs)
        if ((y - bl.cy) * (y - bl.cy) + (x - bl.cx) * (x - bl.cx) <= bl.r * bl.r) v = lung;
      // ribs curve downward away from the midline
      const double phase = 2.0 * std::numbers::pi * (y - rib_bend * h * nx * nx) / rib_period + rib_phase;
      v += rib_amp * std::sin(phase);
      v += noise(rng);
      img.at(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  // quantize as the PNG round trip would, so in-memory and on-disk samples agree
  for (auto& v : img.values()) v = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;
  return Sample{synthetic_id(index), std::move(img), std::move(mask)};
}

DatasetManifest generate_synthetic(const std::filesystem::path& out_dir, const SyntheticOptions& options) {
  if (options.count < 1) throw usage_error("synthetic count must be >= 1");
  std::error_code ec;
  const auto images = out_dir / "synthetic" / "images";
  const auto masks = out_dir / "synthetic" / "masks";
  std::filesystem::create_directories(images, ec);
  if (!ec) std::filesystem::create_directories(masks, ec);
  if (ec) throw data_error("cannot create output directory " + out_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (int i = 0; i < options.count; ++i) {
    const Sample s = render_synthetic(options.seed, i, options.height, options.width);
    const auto img_rel = std::filesystem::path("synthetic") / "images" / (s.id + ".png");
    const auto mask_rel = std::filesystem::path("synthetic") / "masks" / (s.id + ".png");
    write_image_png(out_dir / img_rel, s.image);
    write_mask_png(out_dir / mask_rel, s.mask);
    manifest.entries.push_back({s.id, Source::synthetic, Split::train, img_rel, mask_rel, {}});
  }
  manifest = split(manifest, options.train_fraction, options.seed);
  save_manifest(manifest, out_dir / "manifest.tsv");
  return manifest;
}

}  // namespace segforge
