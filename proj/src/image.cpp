#include "pim/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace pim {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

GrayImage read_png_gray(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open image '" + path + "'");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("failed to decode '" + path + "'");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  const int color_type = png_get_color_type(png, info);
  if (color_type & PNG_COLOR_MASK_COLOR) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);

  GrayImage img;
  img.height = png_get_image_height(png, info);
  img.width = png_get_image_width(png, info);
  img.pixels.resize(img.height * img.width);
  std::vector<png_bytep> rows(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + y * img.width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

namespace {

void write_png(const std::string& path, std::size_t height, std::size_t width,
               int color_type, std::size_t bytes_per_pixel, const std::uint8_t* pixels) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open '" + path + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed to encode '" + path + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(pixels + y * width * bytes_per_pixel);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

} // namespace

void write_png_gray(const std::string& path, const GrayImage& image) {
  if (image.pixels.size() != image.height * image.width) {
    throw std::invalid_argument("gray image buffer does not match extents");
  }
  write_png(path, image.height, image.width, PNG_COLOR_TYPE_GRAY, 1, image.pixels.data());
}

void write_png_rgb(const std::string& path, const RgbImage& image) {
  if (image.pixels.size() != 3 * image.height * image.width) {
    throw std::invalid_argument("rgb image buffer does not match extents");
  }
  write_png(path, image.height, image.width, PNG_COLOR_TYPE_RGB, 3, image.pixels.data());
}

std::vector<double> to_unit_floats(const GrayImage& image) {
  std::vector<double> out(image.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = image.pixels[i] / 255.0;
  return out;
}

GrayImage from_unit_floats(std::size_t height, std::size_t width, const std::vector<double>& values) {
  if (values.size() != height * width) {
    throw std::invalid_argument("float buffer does not match extents");
  }
  GrayImage img;
  img.height = height;
  img.width = width;
  img.pixels.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return img;
}

std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t src_h,
                                    std::size_t src_w, std::size_t dst_h, std::size_t dst_w) {
  if (src.size() != src_h * src_w) throw std::invalid_argument("source buffer does not match extents");
  std::vector<double> out(dst_h * dst_w);
  const double sy = static_cast<double>(src_h) / static_cast<double>(dst_h);
  const double sx = static_cast<double>(src_w) / static_cast<double>(dst_w);
  for (std::size_t y = 0; y < dst_h; ++y) {
    double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src_h - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, src_h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < dst_w; ++x) {
      double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src_w - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, src_w - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = src[y0 * src_w + x0] * (1.0 - wx) + src[y0 * src_w + x1] * wx;
      const double bot = src[y1 * src_w + x0] * (1.0 - wx) + src[y1 * src_w + x1] * wx;
      out[y * dst_w + x] = top * (1.0 - wy) + bot * wy;
    }
  }
  return out;
}

} // namespace pim
