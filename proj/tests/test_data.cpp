#include <gtest/gtest.h>
#include <png.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "segforge/augment.hpp"
#include "segforge/dataset.hpp"
#include "segforge/png_io.hpp"
#include "segforge/synthetic.hpp"
#include "support/oracles.hpp"

using namespace segforge;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "segforge_data_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

DatasetManifest parse(const std::string& text) {
  std::istringstream in(text);
  return parse_manifest(in, "/data");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    return e.what();
  }
  return "";
}

DatasetManifest entries(int montgomery, int shenzhen) {
  DatasetManifest m;
  for (int i = 0; i < montgomery; ++i)
    m.entries.push_back({"m" + std::to_string(i), Source::montgomery, Split::train, "i", "l", "r"});
  for (int i = 0; i < shenzhen; ++i) m.entries.push_back({"s" + std::to_string(i), Source::shenzhen, Split::train, "i", "m", ""});
  return m;
}

std::map<std::string, Split> assignment(const DatasetManifest& m) {
  std::map<std::string, Split> out;
  for (const auto& e : m.entries) out[e.id] = e.split;
  return out;
}

std::vector<char> bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Manifest, WellFormedThreeLines) {
  const auto m = parse(
      "# comment\n"
      "a\tsynthetic\ttrain\timg/a.png\tmask/a.png\n"
      "\n"
      "b\tshenzhen\ttest\timg/b.png\tmask/b.png\n"
      "c\tmontgomery\ttrain\timg/c.png\tleft/c.png\tright/c.png\n");
  ASSERT_EQ(m.entries.size(), 3u);
  EXPECT_EQ(m.count(Split::train), 2u);
  EXPECT_EQ(m.entries[1].source, Source::shenzhen);
  EXPECT_TRUE(m.entries[2].has_lobes());
  EXPECT_EQ(m.resolve(m.entries[0].image), fs::path("/data/img/a.png"));
  EXPECT_EQ(m.resolve("/abs/x.png"), fs::path("/abs/x.png"));
}

TEST(Manifest, ErrorsNameTheProblem) {
  EXPECT_NE(error_of("a\tsynthetic\ttrain\tx\ty\na\tsynthetic\ttest\tx\ty\n").find("duplicate id 'a'"), std::string::npos);
  EXPECT_NE(error_of("c\tmontgomery\ttrain\timg\tleft\n").find("'c'"), std::string::npos);
  EXPECT_NE(error_of("s\tshenzhen\ttrain\timg\tm\tm2\n").find("'s'"), std::string::npos);
  EXPECT_NE(error_of("a\tkaggle\ttrain\tx\ty\n").find("kaggle"), std::string::npos);
  EXPECT_NE(error_of("a\tsynthetic\tval\tx\ty\n").find("val"), std::string::npos);
  EXPECT_NE(error_of("a\tsynthetic\ttrain\tx\n").find(":1:"), std::string::npos);
}

TEST(Manifest, LoadRequiresFilesAndSaveRoundTrips) {
  const auto dir = fresh_dir("manifest");
  const auto mask = BinaryMask(4, 4, true);
  write_image_png(dir / "a.png", Image(4, 4, 0.5f));
  write_mask_png(dir / "a_mask.png", mask);
  DatasetManifest m;
  m.base_dir = dir;
  m.entries.push_back({"a", Source::synthetic, Split::test, dir / "a.png", dir / "a_mask.png", ""});
  save_manifest(m, dir / "manifest.tsv");
  const auto text = bytes(dir / "manifest.tsv");
  // stored relative to the manifest
  EXPECT_EQ(std::string(text.begin(), text.end()).find(dir.string()), std::string::npos);
  const auto back = load_manifest(dir / "manifest.tsv");
  ASSERT_EQ(back.entries.size(), 1u);
  EXPECT_EQ(fs::weakly_canonical(back.resolve(back.entries[0].mask)), fs::weakly_canonical(dir / "a_mask.png"));
  EXPECT_EQ(back.entries[0].split, Split::test);

  fs::remove(dir / "a_mask.png");
  try {
    load_manifest(dir / "manifest.tsv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("a_mask.png"), std::string::npos);
  }
  EXPECT_THROW(load_manifest(dir / "nope.tsv"), Error);
}

TEST(Split, TenEntriesEightTwoAndReproducible) {
  const auto m = entries(0, 10);
  const auto a = split(m, 0.8, 5), b = split(m, 0.8, 5);
  EXPECT_EQ(a.count(Split::train), 8u);
  EXPECT_EQ(a.count(Split::test), 2u);
  EXPECT_EQ(assignment(a), assignment(b));
  bool differs = false;
  for (std::uint64_t s = 6; s < 20 && !differs; ++s) differs = assignment(split(m, 0.8, s)) != assignment(a);
  EXPECT_TRUE(differs);
  EXPECT_THROW(split(m, 1.5, 0), Error);
}

TEST(Split, StratifiedBySource) {
  const auto s = split(entries(5, 5), 0.8, 3);
  int mont = 0, shen = 0;
  for (const auto& e : s.entries)
    if (e.split == Split::train) (e.source == Source::montgomery ? mont : shen)++;
  EXPECT_EQ(mont, 4);
  EXPECT_EQ(shen, 4);
}

TEST(Split, OverallCountWithinOneOfRatio) {
  for (int a = 0; a <= 7; ++a)
    for (int b = 1; b <= 7; ++b) {
      const auto s = split(entries(a, b), 0.8, 11);
      const double target = 0.8 * (a + b);
      EXPECT_LE(std::abs(static_cast<double>(s.count(Split::train)) - target), 1.0) << a << "+" << b;
    }
}

TEST(MergeLobes, SpecExamples) {
  const auto se3 = StructuringElement::square(3);
  BinaryMask l(12, 12), r(12, 12);
  l.set(3, 2, true);
  EXPECT_EQ(merge_lobes(l, BinaryMask(12, 12), se3), oracle::dilate(l, se3));
  r.set(8, 9, true);
  const auto merged = merge_lobes(l, r, se3);
  EXPECT_EQ(merged.count(), 18);
  EXPECT_EQ(merged, oracle::dilate(mask_union(l, r), se3));
  EXPECT_EQ(connected_components(merged).sizes, (std::vector<std::int64_t>{9, 9}));
  EXPECT_THROW(merge_lobes(l, BinaryMask(12, 11), se3), ShapeError);
}

TEST(MergeLobes, SupersetAndCommutative) {
  std::mt19937_64 rng(17);
  const LobeMergeConfig cfg;  // 5x5 square, one pass
  for (int i = 0; i < 50; ++i) {
    const auto l = oracle::random_mask(24, 24, 0.1, rng), r = oracle::random_mask(24, 24, 0.1, rng);
    const auto m = merge_lobes(l, r, cfg);
    EXPECT_TRUE(is_subset(mask_union(l, r), m));
    EXPECT_EQ(m, merge_lobes(r, l, cfg));
  }
}

TEST(Resize, IdentityConstantAndCheckerboard) {
  std::mt19937_64 rng(2);
  Image img(5, 7);
  for (auto& v : img.values()) v = std::uniform_real_distribution<float>(0, 1)(rng);
  EXPECT_EQ(resize_bilinear(img, 5, 7), img);
  const auto c = resize_bilinear(Image(9, 4, 0.25f), 17, 3);
  for (float v : c.values()) EXPECT_FLOAT_EQ(v, 0.25f);

  BinaryMask board(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) board.set(y, x, (x + y) % 2 == 0);
  const auto small = resize_nearest(board, 2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) EXPECT_EQ(small.get(y, x), board.get(2 * y, 2 * x));
  EXPECT_EQ(resize_nearest(board, 4, 4), board);
  EXPECT_THROW(resize_nearest(board, 0, 2), Error);
  EXPECT_THROW(resize_bilinear(img, 2, 0), Error);

  const auto big = resize_nearest(board, 7, 13);
  for (auto b : big.bits()) EXPECT_LE(b, 1);
}

TEST(Augment, DisabledAndIdentityTransforms) {
  const Sample s = render_synthetic(3, 0, 32, 32);
  AugmentConfig off;
  off.rotate = off.zoom = off.crop = false;
  std::mt19937_64 rng(1);
  const auto same = augment(s, off, rng);
  EXPECT_EQ(same.image, s.image);
  EXPECT_EQ(same.mask, s.mask);

  const GeometricTransform id{0.0, 1.0, 0, 0, 32, 32};
  EXPECT_EQ(apply_transform(s.image, id), s.image);
  EXPECT_EQ(apply_transform(s.mask, id), s.mask);

  AugmentConfig neutral;
  neutral.rotate_max_deg = 0.0;
  neutral.zoom_min = neutral.zoom_max = 1.0;
  neutral.crop_fraction = 1.0;
  const auto n = augment(s, neutral, rng);
  EXPECT_EQ(n.image, s.image);
  EXPECT_EQ(n.mask, s.mask);
}

TEST(Augment, BinaryContractAndEquivariance) {
  AugmentConfig cfg;
  for (int i = 0; i < 30; ++i) {
    const Sample s = render_synthetic(9, i, 40, 48);
    auto rng = augment_stream(4, static_cast<std::uint64_t>(i), 0);
    const auto t = draw_transform(cfg, 40, 48, rng);
    EXPECT_LE(std::abs(t.angle_deg), 10.0);
    EXPECT_GE(t.zoom, 0.9);
    EXPECT_LE(t.zoom, 1.1);
    const auto m = apply_transform(s.mask, t);
    const auto img = apply_transform(s.image, t);
    EXPECT_TRUE(m.height() == img.height() && m.width() == img.width());
    for (auto b : m.bits()) EXPECT_LE(b, 1);
    // the mask path equals the image path on the mask, thresholded
    Image as_image(s.mask.height(), s.mask.width());
    for (int y = 0; y < as_image.height(); ++y)
      for (int x = 0; x < as_image.width(); ++x) as_image.at(y, x) = s.mask.get(y, x) ? 1.0f : 0.0f;
    EXPECT_EQ(binarize(apply_transform(as_image, t), 0.5), m);
  }
}

TEST(Augment, StreamsAreIndependentOfOrder) {
  auto a = augment_stream(1, 5, 2), b = augment_stream(1, 5, 2), c = augment_stream(1, 5, 3);
  const auto x = a(), y = b(), z = c();
  EXPECT_EQ(x, y);
  EXPECT_NE(x, z);
  AugmentConfig bad;
  bad.crop_fraction = 0.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = AugmentConfig{};
  bad.zoom_min = -1;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Png, RoundTripsAndMaskWarning) {
  const auto dir = fresh_dir("png");
  GrayImage8 g{3, 4, {0, 1, 2, 3, 50, 100, 150, 200, 252, 253, 254, 255}};
  write_png_gray(dir / "g.png", g);
  const auto back = read_png_gray(dir / "g.png");
  EXPECT_EQ(back.pixels, g.pixels);
  EXPECT_EQ(from_image(to_image(g)).pixels, g.pixels);

  BinaryMask m(3, 3);
  m.set(1, 2, true);
  write_mask_png(dir / "m.png", m);
  EXPECT_EQ(read_png_gray(dir / "m.png").pixels[5], 255);
  EXPECT_EQ(read_mask_png(dir / "m.png"), m);

  write_png_gray(dir / "soft.png", GrayImage8{1, 3, {0, 127, 128}});
  std::vector<std::string> warnings;
  const auto soft = read_mask_png(dir / "soft.png", [&](const std::string& w) { warnings.push_back(w); });
  EXPECT_FALSE(soft.get(0, 1));
  EXPECT_TRUE(soft.get(0, 2));
  EXPECT_EQ(warnings.size(), 1u);

  std::ofstream(dir / "junk.png") << "not a png";
  EXPECT_THROW(read_png_gray(dir / "junk.png"), Error);
  EXPECT_THROW(read_png_gray(dir / "missing.png"), Error);
}

TEST(Png, ColorInputAveragesChannels) {
  const auto dir = fresh_dir("rgb");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = 2;
  img.height = 1;
  img.format = PNG_FORMAT_RGB;
  const std::uint8_t px[] = {30, 60, 90, 255, 0, 0};
  ASSERT_TRUE(png_image_write_to_file(&img, (dir / "c.png").c_str(), 0, px, 0, nullptr));
  const auto g = read_png_gray(dir / "c.png");
  EXPECT_EQ(g.pixels, (std::vector<std::uint8_t>{60, 85}));
}

TEST(Synthetic, TwoComponentsAndDeterminism) {
  for (int i = 0; i < 40; ++i) {
    const auto s = render_synthetic(7, i, 64, 64);
    EXPECT_EQ(oracle::components(s.mask).size(), 2u) << synthetic_id(i);
    for (float v : s.image.values()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  const auto a = render_synthetic(7, 3, 48, 40);
  EXPECT_EQ(a.image, render_synthetic(7, 3, 48, 40).image);
  EXPECT_NE(a.image, render_synthetic(8, 3, 48, 40).image);

  const auto d1 = fresh_dir("synth1"), d2 = fresh_dir("synth2");
  SyntheticOptions opt;
  opt.count = 10;
  opt.height = opt.width = 32;
  opt.seed = 7;
  const auto m = generate_synthetic(d1, opt);
  generate_synthetic(d2, opt);
  EXPECT_EQ(m.entries.size(), 10u);
  EXPECT_EQ(m.count(Split::train), 8u);
  for (const auto& e : m.entries) {
    const auto rel = fs::relative(m.resolve(e.image), d1);
    EXPECT_EQ(bytes(d1 / rel), bytes(d2 / rel));
  }
  EXPECT_EQ(bytes(d1 / "manifest.tsv"), bytes(d2 / "manifest.tsv"));
  EXPECT_EQ(load_manifest(d1 / "manifest.tsv").entries.size(), 10u);
}

TEST(Sample, LoadMergesLobesAndValidates) {
  const auto dir = fresh_dir("lobes");
  BinaryMask l(16, 16), r(16, 16);
  l.set(5, 3, true);
  r.set(5, 12, true);
  write_image_png(dir / "x.png", Image(16, 16, 0.3f));
  write_mask_png(dir / "l.png", l);
  write_mask_png(dir / "r.png", r);
  DatasetManifest m;
  m.base_dir = dir;
  m.entries.push_back({"x", Source::montgomery, Split::train, "x.png", "l.png", "r.png"});
  const auto s = load_sample(m, m.entries[0], LobeMergeConfig{3, 1});
  EXPECT_EQ(s.mask, oracle::dilate(mask_union(l, r), StructuringElement::square(3)));
  EXPECT_EQ(load_sample(m, m.entries[0]).mask.count(), 50);  // default 5x5

  const auto small = resize_sample(s, 8, 8);
  EXPECT_EQ(small.image.height(), 8);
  EXPECT_EQ(small.mask.width(), 8);
  EXPECT_THROW(validate_sample(Sample{"bad", Image(4, 4), BinaryMask(4, 5)}), ShapeError);
}
