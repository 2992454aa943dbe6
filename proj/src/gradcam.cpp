#include "pim/gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pim {

std::vector<double> channel_weights(const Tensor& activations,
                                    const std::vector<double>& output_grad) {
  if (activations.rank() != 3) {
    throw std::invalid_argument("channel_weights expects [M,H,W], got " + shape_to_string(activations.shape()));
  }
  if (output_grad.size() != activations.size()) {
    throw std::invalid_argument("gradient size " + std::to_string(output_grad.size()) +
                                " does not match activations " + std::to_string(activations.size()));
  }
  const std::size_t m = activations.extent(0);
  const std::size_t p = activations.extent(1) * activations.extent(2);
  std::vector<double> weights(m, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    double acc = 0.0;
    for (std::size_t s = 0; s < p; ++s) acc += output_grad[c * p + s];
    weights[c] = acc / static_cast<double>(p);
  }
  return weights;
}

std::vector<double> combine(const Tensor& activations, const std::vector<double>& weights) {
  if (activations.rank() != 3) {
    throw std::invalid_argument("combine expects [M,H,W], got " + shape_to_string(activations.shape()));
  }
  const std::size_t m = activations.extent(0);
  if (weights.size() != m) {
    throw std::invalid_argument("weight count " + std::to_string(weights.size()) +
                                " does not match channels " + std::to_string(m));
  }
  const std::size_t p = activations.extent(1) * activations.extent(2);
  std::vector<double> raw(p, 0.0);
  const auto& a = activations.data();
  for (std::size_t c = 0; c < m; ++c) {
    const double w = weights[c];
    if (w == 0.0) continue;
    for (std::size_t s = 0; s < p; ++s) raw[s] += w * a[c * p + s];
  }
  for (double& v : raw) v = v > 0.0 ? v : 0.0;
  return raw;
}

Heatmap normalize_upsample(const std::vector<double>& raw, std::size_t src_h, std::size_t src_w,
                           std::size_t dst_h, std::size_t dst_w) {
  if (raw.size() != src_h * src_w) throw std::invalid_argument("raw map does not match extents");
  if (dst_h < src_h || dst_w < src_w) {
    throw std::invalid_argument("upsample target smaller than source");
  }
  std::vector<double> normalized = raw;
  double mx = 0.0;
  for (double v : normalized) mx = std::max(mx, v);
  if (mx > 0.0) {
    for (double& v : normalized) v /= mx;
  }
  Heatmap h;
  h.source_height = src_h;
  h.source_width = src_w;
  h.height = dst_h;
  h.width = dst_w;
  h.values = resize_bilinear(normalized, src_h, src_w, dst_h, dst_w);
  return h;
}

void heat_color(double t, double& r, double& g, double& b) {
  t = std::clamp(t, 0.0, 1.0);
  if (t < 0.5) {
    r = 0.0;
    g = 2.0 * t;
    b = 1.0 - 2.0 * t;
  } else {
    r = 2.0 * t - 1.0;
    g = 2.0 - 2.0 * t;
    b = 0.0;
  }
}

RgbImage overlay(const GrayImage& image, const Heatmap& heatmap, double alpha) {
  if (heatmap.height != image.height || heatmap.width != image.width) {
    throw std::invalid_argument("heatmap extents do not match image");
  }
  RgbImage out;
  out.height = image.height;
  out.width = image.width;
  out.pixels.resize(3 * image.height * image.width);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const double gray = image.pixels[i];
    const double t = heatmap.values[i];
    double r, g, b;
    if (t <= 0.0) {
      // zero heat is fully transparent
      r = g = b = gray;
    } else {
      double cr, cg, cb;
      heat_color(t, cr, cg, cb);
      r = (1.0 - alpha) * gray + alpha * cr * 255.0;
      g = (1.0 - alpha) * gray + alpha * cg * 255.0;
      b = (1.0 - alpha) * gray + alpha * cb * 255.0;
    }
    out.pixels[3 * i + 0] = static_cast<std::uint8_t>(std::lround(std::clamp(r, 0.0, 255.0)));
    out.pixels[3 * i + 1] = static_cast<std::uint8_t>(std::lround(std::clamp(g, 0.0, 255.0)));
    out.pixels[3 * i + 2] = static_cast<std::uint8_t>(std::lround(std::clamp(b, 0.0, 255.0)));
  }
  return out;
}

} // namespace pim
