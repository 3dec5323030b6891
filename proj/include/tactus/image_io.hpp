#pragma once

// PNG and portable-pixmap ingest/export. Files hold gamma-free samples;
// intensities are linear in [0,1] in memory and scaled by the file's
// maximum sample value on disk.

#include <png.h>

#include <cstdio>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "tactus/core.hpp"

namespace tactus {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::uint16_t to_u16(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<std::uint16_t>(c * 65535.0f + 0.5f);
}
inline std::uint8_t to_u8(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<std::uint8_t>(c * 255.0f + 0.5f);
}

}  // namespace detail

/// Writes an RGB PNG. bit_depth must be 8 or 16; 16 preserves enough
/// precision for calibration frames, 8 is for overlays and plots.
inline void write_png(const std::string& path, const TactileImage& img,
                      int bit_depth = 16) {
  if (bit_depth != 8 && bit_depth != 16)
    throw std::invalid_argument("write_png: bit depth must be 8 or 16");
  if (img.width <= 0 || img.height <= 0)
    throw std::invalid_argument("write_png: empty image");

  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw InputError("cannot open for writing: " + path);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw NumericError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw NumericError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, bit_depth,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const int bytes_per_sample = bit_depth / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3 *
                                 bytes_per_sample);
  for (int y = 0; y < img.height; ++y) {
    unsigned char* out = row.data();
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = img.plane[c](x, y);
        if (bit_depth == 16) {
          const std::uint16_t s = detail::to_u16(v);
          *out++ = static_cast<unsigned char>(s >> 8);
          *out++ = static_cast<unsigned char>(s & 0xff);
        } else {
          *out++ = detail::to_u8(v);
        }
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads a PNG of any color type into a linear RGB TactileImage.
inline TactileImage read_png(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw InputError("cannot open: " + path);

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw InputError("not a PNG file: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw NumericError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw NumericError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("png read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY ||
      color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> row(rowbytes);

  TactileImage img(static_cast<int>(w), static_cast<int>(h));
  const float scale = out_depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    const unsigned char* in = row.data();
    for (png_uint_32 x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        std::uint16_t v;
        if (out_depth == 16) {
          v = static_cast<std::uint16_t>((in[0] << 8) | in[1]);
          in += 2;
        } else {
          v = *in++;
        }
        img.plane[c](static_cast<int>(x), static_cast<int>(y)) = v * scale;
      }
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

/// Binary P6 portable pixmap. maxval 255 or 65535 (16-bit is big-endian).
inline void write_ppm(const std::string& path, const TactileImage& img,
                      int maxval = 255) {
  if (maxval != 255 && maxval != 65535)
    throw std::invalid_argument("write_ppm: maxval must be 255 or 65535");
  std::FILE* raw = std::fopen(path.c_str(), "wb");
  if (!raw) throw InputError("cannot open for writing: " + path);
  detail::FilePtr fp(raw);
  std::fprintf(fp.get(), "P6\n%d %d\n%d\n", img.width, img.height, maxval);
  std::vector<unsigned char> row;
  for (int y = 0; y < img.height; ++y) {
    row.clear();
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        if (maxval == 65535) {
          const std::uint16_t s = detail::to_u16(img.plane[c](x, y));
          row.push_back(static_cast<unsigned char>(s >> 8));
          row.push_back(static_cast<unsigned char>(s & 0xff));
        } else {
          row.push_back(detail::to_u8(img.plane[c](x, y)));
        }
      }
    if (std::fwrite(row.data(), 1, row.size(), fp.get()) != row.size())
      throw InputError("write failed: " + path);
  }
}

inline TactileImage read_ppm(const std::string& path) {
  std::FILE* raw = std::fopen(path.c_str(), "rb");
  if (!raw) throw InputError("cannot open: " + path);
  detail::FilePtr fp(raw);

  auto next_token = [&]() -> std::string {
    std::string tok;
    int ch;
    while ((ch = std::fgetc(fp.get())) != EOF) {
      if (ch == '#') {
        while ((ch = std::fgetc(fp.get())) != EOF && ch != '\n') {
        }
        continue;
      }
      if (std::isspace(ch)) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(static_cast<char>(ch));
    }
    return tok;
  };

  if (next_token() != "P6") throw InputError("not a P6 pixmap: " + path);
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw InputError("bad pixmap header: " + path);

  const bool wide = maxval > 255;
  const std::size_t n =
      static_cast<std::size_t>(w) * h * 3 * (wide ? 2 : 1);
  std::vector<unsigned char> buf(n);
  if (std::fread(buf.data(), 1, n, fp.get()) != n)
    throw InputError("truncated pixmap: " + path);

  TactileImage img(w, h);
  const float scale = 1.0f / maxval;
  const unsigned char* in = buf.data();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        int v;
        if (wide) {
          v = (in[0] << 8) | in[1];
          in += 2;
        } else {
          v = *in++;
        }
        img.plane[c](x, y) = v * scale;
      }
  return img;
}

/// Dispatches on file extension (.png, .ppm).
inline TactileImage read_image(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".ppm") return read_ppm(path);
  return read_png(path);
}

inline void write_image(const std::string& path, const TactileImage& img,
                        int bit_depth = 16) {
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".ppm")
    write_ppm(path, img, bit_depth == 16 ? 65535 : 255);
  else
    write_png(path, img, bit_depth);
}

}  // namespace tactus
