#ifndef PIM_GRADCAM_HPP
#define PIM_GRADCAM_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "pim/image.hpp"
#include "pim/tensor.hpp"

namespace pim {

// Which activation map to explain and for which class.
struct CamRequest {
  std::size_t layer = 3;       // block index in [0,4); default last block
  std::size_t class_index = 0; // d in [0, C')
  bool use_fpn_maps = false;   // explain projected maps instead of raw block output
};

// Normalized localization map: nonnegative, max 1 unless identically zero.
struct Heatmap {
  std::size_t source_height = 0;
  std::size_t source_width = 0;
  std::size_t height = 0; // upsampled extents
  std::size_t width = 0;
  std::vector<double> values;
};

// Channel weights: gradient of the class score averaged over each channel's
// spatial positions. activations/output_grad are [M,H,W].
std::vector<double> channel_weights(const Tensor& activations,
                                    const std::vector<double>& output_grad);

// Weighted channel combination clipped at zero: ReLU(sum_m v_m * B^m).
std::vector<double> combine(const Tensor& activations, const std::vector<double>& weights);

// Max-normalize (skipped when all-zero) and bilinearly upsample with
// half-pixel-center alignment.
Heatmap normalize_upsample(const std::vector<double>& raw, std::size_t src_h, std::size_t src_w,
                           std::size_t dst_h, std::size_t dst_w);

// Fixed color ramp blue(0) -> green(0.5) -> red(1); returns r,g,b in [0,1].
void heat_color(double t, double& r, double& g, double& b);

// Alpha-blend the heatmap over a grayscale image through the color ramp.
// Zero heat leaves pixels untouched.
RgbImage overlay(const GrayImage& image, const Heatmap& heatmap, double alpha = 0.4);

} // namespace pim

#endif
