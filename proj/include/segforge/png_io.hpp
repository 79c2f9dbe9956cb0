#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "segforge/image.hpp"

namespace segforge {

// 8-bit grayscale raster as stored on disk.
struct GrayImage8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
};

// Decodes any PNG to 8-bit grayscale. 16-bit samples are reduced to 8 bits,
// palettes expanded, alpha dropped; color pixels become the plain average of
// R, G and B.
GrayImage8 read_png_gray(const std::filesystem::path& path);

void write_png_gray(const std::filesystem::path& path, const GrayImage8& img);

Image to_image(const GrayImage8& g);
GrayImage8 from_image(const Image& img);

// Masks on disk: 0 background, 255 foreground. Values strictly between are
// thresholded at 128 and reported through `warn`.
using WarningSink = std::function<void(const std::string&)>;
BinaryMask read_mask_png(const std::filesystem::path& path, const WarningSink& warn = {});
void write_mask_png(const std::filesystem::path& path, const BinaryMask& m);

Image read_image_png(const std::filesystem::path& path);
void write_image_png(const std::filesystem::path& path, const Image& img);

}  // namespace segforge
