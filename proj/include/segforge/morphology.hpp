#pragma once
// Binary morphology and the postprocessing block applied to network output.
//
// Border policy: pixels outside the image are background for both dilation
// and erosion, so dilation never bleeds past the frame and erosion strips
// foreground that touches it.

#include <cstdint>
#include <string>
#include <vector>

#include "segforge/image.hpp"

namespace segforge {

class StructuringElement {
 public:
  // Odd-sided; origin at the center cell.
  StructuringElement(int h, int w, std::vector<std::uint8_t> cells);

  static StructuringElement square(int side);
  static StructuringElement cross(int side);

  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  bool get(int dy, int dx) const;  // offsets relative to the origin
  int radius_y() const noexcept { return h_ / 2; }
  int radius_x() const noexcept { return w_ / 2; }
  StructuringElement reflect() const;
  bool symmetric() const;

  bool operator==(const StructuringElement&) const = default;

 private:
  int h_;
  int w_;
  std::vector<std::uint8_t> cells_;
};

// Pixel true iff prob >= threshold. threshold must lie in (0, 1).
BinaryMask binarize(const Grid<float>& prob, double threshold);

BinaryMask dilate(const BinaryMask& m, const StructuringElement& se, int iterations = 1);
BinaryMask erode(const BinaryMask& m, const StructuringElement& se, int iterations = 1);
// erode, then dilate
BinaryMask open(const BinaryMask& m, const StructuringElement& se, int iterations = 1);
// dilate, then erode
BinaryMask close(const BinaryMask& m, const StructuringElement& se, int iterations = 1);

// One-pixel inner boundary: m minus erode(m, 3x3).
BinaryMask boundary(const BinaryMask& m);

struct Components {
  // 0 = background; 1..count() ordered by decreasing size, ties broken by
  // the component's first pixel in row-major order.
  Grid<std::int32_t> labels;
  std::vector<std::int64_t> sizes;

  std::size_t count() const noexcept { return sizes.size(); }
};

// 8-connectivity labeling.
Components connected_components(const BinaryMask& m);

// Keeps the k largest components; k >= 1.
BinaryMask keep_largest(const BinaryMask& m, int k);

enum class MorphOp { open, close, dilate, erode };

std::string to_string(MorphOp op);
MorphOp parse_morph_op(const std::string& s);

struct MorphStep {
  MorphOp op;
  StructuringElement se;
  int iterations = 1;
};

struct PostprocessConfig {
  double threshold = 0.5;
  std::vector<MorphStep> pipeline = {
      {MorphOp::open, StructuringElement::square(3), 1},
      {MorphOp::close, StructuringElement::square(3), 1},
  };
  int keep_largest = 2;  // 0 disables the component filter

  void validate() const;
};

// Parses "open:3:1,close:3:1" (op:square_side:iterations); side and
// iterations may be omitted (3, 1). "" or "none" gives an empty pipeline.
std::vector<MorphStep> parse_pipeline(const std::string& spec);
std::string format_pipeline(const std::vector<MorphStep>& steps);

BinaryMask apply_step(const BinaryMask& m, const MorphStep& step);

// binarize -> pipeline steps in order -> keep_largest.
BinaryMask postprocess(const Grid<float>& prob, const PostprocessConfig& config);

}  // namespace segforge
