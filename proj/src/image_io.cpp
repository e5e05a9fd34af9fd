// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>
#include <vector>

namespace ovseg {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

std::vector<unsigned char> read_png_rgb8(const std::string& path, int& h, int& w) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open image: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png decode failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  png_byte color = png_get_color_type(png, info);
  png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  std::vector<unsigned char> data(static_cast<size_t>(h) * w * 3);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = data.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return data;
}

void write_png_rgb8(const std::string& path, const std::vector<unsigned char>& data, int h,
                    int w) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open image for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png encode failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = const_cast<png_bytep>(data.data() + static_cast<size_t>(y) * w * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image read_png(const std::string& path) {
  int h = 0, w = 0;
  auto data = read_png_rgb8(path, h, w);
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      size_t at = (static_cast<size_t>(y) * w + x) * 3;
      for (int c = 0; c < 3; ++c) img.pixels(y * w + x, c) = data[at + c] / 255.0;
    }
  return img;
}

void write_png(const std::string& path, const Image& image) {
  std::vector<unsigned char> data(static_cast<size_t>(image.h) * image.w * 3);
  for (int p = 0; p < image.h * image.w; ++p)
    for (int c = 0; c < 3; ++c) {
      double v = std::clamp(image.pixels(p, c), 0.0, 1.0);
      data[static_cast<size_t>(p) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  write_png_rgb8(path, data, image.h, image.w);
}

int rgb_to_segment_id(int r, int g, int b) { return r + 256 * g + 256 * 256 * b; }

void segment_id_to_rgb(int id, int& r, int& g, int& b) {
  r = id % 256;
  g = (id / 256) % 256;
  b = id / (256 * 256);
}

MatI read_id_map_png(const std::string& path) {
  int h = 0, w = 0;
  auto data = read_png_rgb8(path, h, w);
  MatI ids(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      size_t at = (static_cast<size_t>(y) * w + x) * 3;
      ids(y, x) = rgb_to_segment_id(data[at], data[at + 1], data[at + 2]);
    }
  return ids;
}

void write_id_map_png(const std::string& path, const MatI& ids) {
  const int h = static_cast<int>(ids.rows()), w = static_cast<int>(ids.cols());
  std::vector<unsigned char> data(static_cast<size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int r, g, b;
      segment_id_to_rgb(ids(y, x), r, g, b);
      size_t at = (static_cast<size_t>(y) * w + x) * 3;
      data[at] = static_cast<unsigned char>(r);
      data[at + 1] = static_cast<unsigned char>(g);
      data[at + 2] = static_cast<unsigned char>(b);
    }
  write_png_rgb8(path, data, h, w);
}

Image resize_image(const Image& src, int dst_h, int dst_w) {
  InterpPlan plan = make_bilinear_plan(src.h, src.w, dst_h, dst_w);
  Image out(dst_h, dst_w);
  out.pixels = apply_interp(plan, src.pixels);
  return out;
}

void overlay_color(int segment_id, int& r, int& g, int& b) {
  uint64_t h = static_cast<uint64_t>(segment_id) * 0x9e3779b97f4a7c15ull + 0x1234567ull;
  h ^= h >> 29;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 32;
  r = 64 + static_cast<int>(h % 192);
  g = 64 + static_cast<int>((h >> 8) % 192);
  b = 64 + static_cast<int>((h >> 16) % 192);
}

}  // namespace ovseg
