#include <gtest/gtest.h>

#include "segforge/morphology.hpp"
#include "support/oracles.hpp"

using namespace segforge;

namespace {

BinaryMask from_bits(int h, int w, std::uint32_t bits) {
  BinaryMask m(h, w);
  for (int i = 0; i < h * w; ++i) m.set(i / w, i % w, (bits >> i) & 1u);
  return m;
}

BinaryMask block(int h, int w, int y0, int x0, int bh, int bw) {
  BinaryMask m(h, w);
  for (int y = y0; y < y0 + bh; ++y)
    for (int x = x0; x < x0 + bw; ++x) m.set(y, x, true);
  return m;
}

BinaryMask pad(const BinaryMask& m, int r) {
  BinaryMask out(m.height() + 2 * r, m.width() + 2 * r);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) out.set(y + r, x + r, m.get(y, x));
  return out;
}

BinaryMask crop(const BinaryMask& m, int r) {
  BinaryMask out(m.height() - 2 * r, m.width() - 2 * r);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.set(y, x, m.get(y + r, x + r));
  return out;
}

Grid<float> probs(int h, int w, std::vector<float> v) { return Grid<float>(h, w, std::move(v)); }

}  // namespace

TEST(StructuringElement, ConstructionRules) {
  const auto sq = StructuringElement::square(3);
  EXPECT_TRUE(sq.symmetric());
  EXPECT_TRUE(sq.get(-1, 1));
  EXPECT_FALSE(sq.get(2, 0));
  const auto cr = StructuringElement::cross(3);
  EXPECT_FALSE(cr.get(-1, -1));
  EXPECT_TRUE(cr.get(0, 1));
  EXPECT_THROW(StructuringElement::square(4), Error);
  EXPECT_THROW(StructuringElement(3, 3, std::vector<std::uint8_t>(9, 0)), Error);
  // origin cell must be set
  EXPECT_THROW(StructuringElement(3, 3, {1, 1, 1, 1, 0, 1, 1, 1, 1}), Error);
  const StructuringElement l(3, 3, {0, 0, 0, 0, 1, 1, 0, 0, 1});
  EXPECT_FALSE(l.symmetric());
  EXPECT_TRUE(l.reflect().get(-1, -1));
  EXPECT_EQ(l.reflect().reflect(), l);
}

TEST(Binarize, ThresholdIsInclusive) {
  const auto all = binarize(Grid<float>(2, 3, 0.9f), 0.5);
  EXPECT_EQ(all.count(), 6);
  EXPECT_TRUE(binarize(Grid<float>(1, 1, 0.5f), 0.5).get(0, 0));
  const auto m = binarize(probs(1, 2, {0.4f, 0.6f}), 0.5);
  EXPECT_FALSE(m.get(0, 0));
  EXPECT_TRUE(m.get(0, 1));
  EXPECT_THROW(binarize(Grid<float>(1, 1, 0.5f), 1.0), Error);
  EXPECT_THROW(binarize(Grid<float>(1, 1, 0.5f), 0.0), Error);
}

TEST(Morphology, SpecExamples) {
  const auto se = StructuringElement::square(3);
  BinaryMask dot(5, 5);
  dot.set(2, 2, true);
  EXPECT_EQ(dilate(dot, se), block(5, 5, 1, 1, 3, 3));
  EXPECT_EQ(erode(block(5, 5, 1, 1, 3, 3), se), dot);

  // isolated pixel is removed by opening; a hole in a solid block is filled by closing
  auto noisy = block(9, 9, 2, 2, 5, 5);
  noisy.set(0, 8, true);
  EXPECT_EQ(open(noisy, se), block(9, 9, 2, 2, 5, 5));
  auto holed = block(9, 9, 2, 2, 5, 5);
  holed.set(4, 4, false);
  EXPECT_EQ(close(holed, se), block(9, 9, 2, 2, 5, 5));
  EXPECT_EQ(close(holed, se), oracle::close(holed, se));
}

TEST(Morphology, BorderIsBackground) {
  const auto se = StructuringElement::square(3);
  const BinaryMask full(4, 4, true);
  EXPECT_EQ(dilate(full, se), full);
  EXPECT_EQ(erode(full, se), block(4, 4, 1, 1, 2, 2));
}

TEST(Morphology, IterationsComposeAndCrossSe) {
  std::mt19937_64 rng(12);
  const auto se = StructuringElement::cross(3);
  for (int i = 0; i < 20; ++i) {
    const auto m = oracle::random_mask(12, 10, 0.5, rng);
    EXPECT_EQ(dilate(m, se, 2), oracle::dilate(oracle::dilate(m, se), se));
    EXPECT_EQ(erode(m, se, 3), oracle::erode(oracle::erode(oracle::erode(m, se), se), se));
  }
  const StructuringElement l(3, 3, {0, 0, 0, 0, 1, 1, 0, 0, 1});
  for (int i = 0; i < 20; ++i) {
    const auto m = oracle::random_mask(9, 11, 0.4, rng);
    EXPECT_EQ(dilate(m, l), oracle::dilate(m, l));
    EXPECT_EQ(erode(m, l), oracle::erode(m, l));
  }
}

TEST(Morphology, ExhaustiveFourByFourAgainstOracle) {
  const auto se = StructuringElement::square(3);
  for (std::uint32_t bits = 0; bits < (1u << 16); ++bits) {
    const auto m = from_bits(4, 4, bits);
    ASSERT_EQ(dilate(m, se), oracle::dilate(m, se)) << bits;
    ASSERT_EQ(erode(m, se), oracle::erode(m, se)) << bits;
    ASSERT_EQ(open(m, se), oracle::open(m, se)) << bits;
    ASSERT_EQ(close(m, se), oracle::close(m, se)) << bits;
    ASSERT_EQ(keep_largest(m, 1), oracle::keep_largest(m, 1)) << bits;
    ASSERT_EQ(keep_largest(m, 2), oracle::keep_largest(m, 2)) << bits;
  }
}

TEST(Morphology, RandomProperties) {
  std::mt19937_64 rng(21);
  const auto se = StructuringElement::square(3);
  for (int i = 0; i < 200; ++i) {
    const auto m = oracle::random_mask(32, 32, 0.3 + 0.4 * (i % 3) / 2.0, rng);
    const auto o = open(m, se), c = close(m, se);
    EXPECT_EQ(open(o, se), o);
    EXPECT_EQ(close(c, se), c);
    EXPECT_TRUE(is_subset(o, m));

    // m ⊆ close(m) away from the frame; erosion strips border-touching pixels
    for (int y = 1; y < 31; ++y)
      for (int x = 1; x < 31; ++x)
        if (m.get(y, x)) {
          EXPECT_TRUE(c.get(y, x));
        }

    // duality, with the outside of the frame carried explicitly as background
    const auto dual = complement(crop(dilate(complement(pad(m, 1)), se.reflect()), 1));
    EXPECT_EQ(erode(m, se), dual);
    EXPECT_EQ(dual, oracle::erode(m, se));

    const auto m2 = mask_union(m, oracle::random_mask(32, 32, 0.1, rng));
    EXPECT_TRUE(is_subset(dilate(m, se), dilate(m2, se)));
    EXPECT_TRUE(is_subset(erode(m, se), erode(m2, se)));
  }
}

TEST(Components, SpecExamples) {
  EXPECT_EQ(connected_components(BinaryMask(5, 5)).count(), 0u);

  auto two = mask_union(block(8, 8, 0, 0, 3, 3), block(8, 8, 5, 5, 2, 2));
  auto cc = connected_components(two);
  EXPECT_EQ(cc.sizes, (std::vector<std::int64_t>{9, 4}));
  EXPECT_EQ(cc.labels.at(0, 0), 1);
  EXPECT_EQ(cc.labels.at(6, 6), 2);
  EXPECT_EQ(cc.labels.at(4, 4), 0);

  BinaryMask diag(3, 3);
  diag.set(0, 0, true);
  diag.set(1, 1, true);
  diag.set(2, 2, true);
  EXPECT_EQ(connected_components(diag).count(), 1u);
}

TEST(Components, TiesBrokenByFirstPixel) {
  // equal sizes: the one starting earlier in row-major order gets label 1
  const auto m = mask_union(block(6, 6, 3, 0, 2, 2), block(6, 6, 0, 4, 2, 2));
  const auto cc = connected_components(m);
  EXPECT_EQ(cc.labels.at(0, 4), 1);
  EXPECT_EQ(cc.labels.at(3, 0), 2);
}

TEST(Components, LabelsMatchFloodFillOracle) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto m = oracle::random_mask(20, 17, 0.45, rng);
    auto comps = oracle::components(m);
    std::stable_sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
    const auto cc = connected_components(m);
    ASSERT_EQ(cc.count(), comps.size());
    for (std::size_t k = 0; k < comps.size(); ++k) {
      EXPECT_EQ(cc.sizes[k], static_cast<std::int64_t>(comps[k].size()));
      for (auto [y, x] : comps[k]) EXPECT_EQ(cc.labels.at(y, x), static_cast<int>(k + 1));
    }
  }
}

TEST(KeepLargest, SpecExamples) {
  BinaryMask m(10, 10);
  for (int x = 0; x < 10; ++x) m.set(0, x, true);  // 10
  for (int x = 0; x < 5; ++x) m.set(3, x, true);   // 5
  m.set(8, 8, true);                               // 1
  auto kept = keep_largest(m, 2);
  EXPECT_FALSE(kept.get(8, 8));
  EXPECT_EQ(kept.count(), 15);
  EXPECT_EQ(kept, oracle::keep_largest(m, 2));

  const auto one = block(6, 6, 1, 1, 3, 3);
  EXPECT_EQ(keep_largest(one, 2), one);
  EXPECT_THROW(keep_largest(one, 0), Error);

  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const auto r = oracle::random_mask(16, 16, 0.4, rng);
    const auto k = keep_largest(r, 3);
    EXPECT_TRUE(is_subset(k, r));
    EXPECT_LE(connected_components(k).count(), 3u);
  }
}

TEST(Boundary, InnerOnePixelRing) {
  const auto b = boundary(block(7, 7, 1, 1, 5, 5));
  EXPECT_EQ(b.count(), 16);
  EXPECT_FALSE(b.get(3, 3));
  EXPECT_TRUE(b.get(1, 3));
}

TEST(Pipeline, ParseAndFormat) {
  const auto p = parse_pipeline("open:3:1,close:5:2");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].op, MorphOp::open);
  EXPECT_EQ(p[1].se, StructuringElement::square(5));
  EXPECT_EQ(p[1].iterations, 2);
  EXPECT_EQ(format_pipeline(p), "open:3:1,close:5:2");
  EXPECT_TRUE(parse_pipeline("none").empty());
  EXPECT_TRUE(parse_pipeline("").empty());
  const auto bare = parse_pipeline("dilate");
  EXPECT_EQ(bare[0].se, StructuringElement::square(3));
  EXPECT_EQ(bare[0].iterations, 1);
  for (const char* bad : {"open:4:1", "grow:3:1", "open:3:0", "open:3:x", "open:3x:1"})
    EXPECT_THROW(parse_pipeline(bad), Error) << bad;
  EXPECT_EQ(format_pipeline(PostprocessConfig{}.pipeline), "open:3:1,close:3:1");
}

TEST(Postprocess, ConfigValidation) {
  PostprocessConfig c;
  EXPECT_NO_THROW(c.validate());
  c.pipeline.clear();
  c.keep_largest = 0;
  EXPECT_THROW(c.validate(), Error);
  c = PostprocessConfig{};
  c.threshold = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Postprocess, EmptyPipelineIsBinarizePlusFilter) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Grid<float> p(16, 16);
  for (auto& v : p.values()) v = u(rng);
  PostprocessConfig c;
  c.pipeline.clear();
  EXPECT_EQ(postprocess(p, c), oracle::keep_largest(binarize(p, 0.5), 2));
}

TEST(Postprocess, CleanTwoBlobInputPassesThrough) {
  const auto blobs = mask_union(block(20, 20, 2, 2, 8, 6), block(20, 20, 2, 12, 8, 6));
  Grid<float> p(20, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) p.at(y, x) = blobs.get(y, x) ? 0.97f : 0.02f;
  EXPECT_EQ(postprocess(p, PostprocessConfig{}), blobs);
}

TEST(Postprocess, RemovesSpecksFromNoisyPrediction) {
  auto blobs = mask_union(block(24, 24, 3, 2, 14, 7), block(24, 24, 3, 14, 14, 7));
  Grid<float> p(24, 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) p.at(y, x) = blobs.get(y, x) ? 0.9f : 0.1f;
  p.at(21, 11) = 0.8f;
  p.at(1, 11) = 0.7f;
  p.at(8, 5) = 0.2f;  // pinhole
  const auto raw = binarize(p, 0.5), post = postprocess(p, PostprocessConfig{});
  EXPECT_EQ(post, blobs);
  EXPECT_GT(oracle::dice(post, blobs), oracle::dice(raw, blobs));
}
