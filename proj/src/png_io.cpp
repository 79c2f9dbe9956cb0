#include "segforge/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <memory>

namespace segforge {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngError {
  char message[256] = "unknown libpng error";
};

void on_error(png_structp png, png_const_charp msg) {
  auto* err = static_cast<PngError*>(png_get_error_ptr(png));
  if (err) std::snprintf(err->message, sizeof(err->message), "%s", msg);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

// Everything between setjmp and longjmp lives in plain C storage so unwinding
// via longjmp skips no destructors.
struct DecodeState {
  png_structp png = nullptr;
  png_infop info = nullptr;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  png_bytep buffer = nullptr;
  png_bytepp rows = nullptr;
};

bool decode(std::FILE* fp, DecodeState& s, PngError& err) {
  s.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (!s.png) return false;
  s.info = png_create_info_struct(s.png);
  if (!s.info) return false;
  if (setjmp(png_jmpbuf(s.png))) return false;

  png_init_io(s.png, fp);
  png_read_info(s.png, s.info);
  const int color = png_get_color_type(s.png, s.info);
  const int depth = png_get_bit_depth(s.png, s.info);
  if (depth == 16) png_set_strip_16(s.png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(s.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(s.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(s.png);
  png_set_interlace_handling(s.png);
  png_read_update_info(s.png, s.info);

  s.width = png_get_image_width(s.png, s.info);
  s.height = png_get_image_height(s.png, s.info);
  s.channels = png_get_channels(s.png, s.info);
  const png_size_t stride = png_get_rowbytes(s.png, s.info);
  s.buffer = static_cast<png_bytep>(std::malloc(stride * s.height));
  s.rows = static_cast<png_bytepp>(std::malloc(sizeof(png_bytep) * s.height));
  if (!s.buffer || !s.rows) {
    std::snprintf(err.message, sizeof(err.message), "out of memory");
    return false;
  }
  for (png_uint_32 y = 0; y < s.height; ++y) s.rows[y] = s.buffer + y * stride;
  png_read_image(s.png, s.rows);
  png_read_end(s.png, nullptr);
  return true;
}

void release(DecodeState& s) {
  if (s.png) png_destroy_read_struct(&s.png, s.info ? &s.info : nullptr, nullptr);
  std::free(s.buffer);
  std::free(s.rows);
}

struct EncodeState {
  png_structp png = nullptr;
  png_infop info = nullptr;
};

bool encode(std::FILE* fp, EncodeState& s, PngError& err, const GrayImage8& img) {
  s.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (!s.png) return false;
  s.info = png_create_info_struct(s.png);
  if (!s.info) return false;
  if (setjmp(png_jmpbuf(s.png))) return false;
  png_init_io(s.png, fp);
  png_set_IHDR(s.png, s.info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(s.png, s.info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(s.png, img.pixels.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width));
  png_write_end(s.png, nullptr);
  return true;
}

}  // namespace

GrayImage8 read_png_gray(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw data_error("cannot open image: " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw data_error("not a PNG file: " + path.string());
  std::rewind(fp.get());

  PngError err;
  DecodeState s;
  const bool ok = decode(fp.get(), s, err);
  GrayImage8 out;
  if (ok) {
    out.width = static_cast<int>(s.width);
    out.height = static_cast<int>(s.height);
    out.pixels.resize(static_cast<std::size_t>(s.width) * s.height);
    for (png_uint_32 y = 0; y < s.height; ++y) {
      const png_bytep row = s.rows[y];
      std::uint8_t* dst = out.pixels.data() + static_cast<std::size_t>(y) * s.width;
      if (s.channels == 1) {
        std::copy(row, row + s.width, dst);
      } else if (s.channels >= 3) {
        for (png_uint_32 x = 0; x < s.width; ++x) {
          const png_bytep px = row + x * static_cast<unsigned>(s.channels);
          const unsigned sum = px[0] + px[1] + px[2];
          dst[x] = static_cast<std::uint8_t>((sum + 1) / 3);
        }
      } else {
        for (png_uint_32 x = 0; x < s.width; ++x) dst[x] = row[x * static_cast<unsigned>(s.channels)];
      }
    }
  }
  release(s);
  if (!ok) throw data_error("failed to decode PNG " + path.string() + ": " + err.message);
  return out;
}

void write_png_gray(const std::filesystem::path& path, const GrayImage8& img) {
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height))
    throw runtime_error("write_png_gray: pixel buffer does not match dimensions");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw data_error("cannot open for writing: " + path.string());
  PngError err;
  EncodeState s;
  const bool ok = encode(fp.get(), s, err, img);
  if (s.png) png_destroy_write_struct(&s.png, s.info ? &s.info : nullptr);
  if (!ok) throw runtime_error("failed to encode PNG " + path.string() + ": " + err.message);
  if (std::fflush(fp.get()) != 0) throw runtime_error("failed writing " + path.string());
}

Image to_image(const GrayImage8& g) {
  Image img(g.height, g.width);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) img[i] = static_cast<float>(g.pixels[i]) / 255.0f;
  return img;
}

GrayImage8 from_image(const Image& img) {
  GrayImage8 g{img.height(), img.width(), std::vector<std::uint8_t>(img.size())};
  for (std::size_t i = 0; i < img.size(); ++i)
    g.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img[i], 0.0f, 1.0f) * 255.0f));
  return g;
}

BinaryMask read_mask_png(const std::filesystem::path& path, const WarningSink& warn) {
  const GrayImage8 g = read_png_gray(path);
  std::size_t intermediate = 0;
  std::vector<std::uint8_t> bits(g.pixels.size());
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    const auto v = g.pixels[i];
    if (v != 0 && v != 255) ++intermediate;
    bits[i] = v >= 128 ? 1 : 0;
  }
  if (intermediate > 0 && warn)
    warn("mask " + path.string() + ": " + std::to_string(intermediate) +
         " pixels not in {0,255}; thresholded at 128");
  return BinaryMask::from_bytes(g.height, g.width, bits);
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& m) {
  GrayImage8 g{m.height(), m.width(), std::vector<std::uint8_t>(m.size())};
  for (std::size_t i = 0; i < m.size(); ++i) g.pixels[i] = m[i] ? 255 : 0;
  write_png_gray(path, g);
}

Image read_image_png(const std::filesystem::path& path) { return to_image(read_png_gray(path)); }

void write_image_png(const std::filesystem::path& path, const Image& img) {
  write_png_gray(path, from_image(img));
}

}  // namespace segforge
