#ifndef PIM_IMAGE_HPP
#define PIM_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace pim {

// 8-bit grayscale image, row-major.
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
};

// 8-bit RGB image, row-major, interleaved.
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels; // 3 * height * width
};

// PNG I/O. Reads force-convert to 8-bit grayscale (RGB sources go through
// the usual luminance transform, 16-bit is narrowed, alpha is stripped).
GrayImage read_png_gray(const std::string& path);
void write_png_gray(const std::string& path, const GrayImage& image);
void write_png_rgb(const std::string& path, const RgbImage& image);

// Conversions between the curation pipeline's [0,1] float buffers and 8-bit.
std::vector<double> to_unit_floats(const GrayImage& image);
GrayImage from_unit_floats(std::size_t height, std::size_t width, const std::vector<double>& values);

// Bilinear resize of a [0,1] float buffer (half-pixel-center sampling).
std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t src_h,
                                    std::size_t src_w, std::size_t dst_h, std::size_t dst_w);

} // namespace pim

#endif
