#ifndef PIM_SELECTOR_HPP
#define PIM_SELECTOR_HPP

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "pim/backbone.hpp"
#include "pim/checkpoint.hpp"
#include "pim/tensor.hpp"

namespace pim {

// Per-block selection counts. Values larger than a block's H*W are clamped
// at run start (desk resolutions are far below the defaults' native scale).
struct SelectionConfig {
  std::array<std::size_t, kNumBlocks> n_sel{2048, 512, 128, 32};

  std::array<std::size_t, kNumBlocks> clamped_for(
      const std::array<std::size_t, kNumBlocks>& spatial_sizes,
      std::vector<std::string>* warnings = nullptr) const;
};

// Per-pixel class scores for one block, shape [C', H, W].
struct PixelLogits {
  Tensor logits;

  std::size_t num_classes() const { return logits.extent(0); }
  std::size_t height() const { return logits.extent(1); }
  std::size_t width() const { return logits.extent(2); }
};

// Top-k feature points of one block: flat indices into H*W, their (row,col)
// coordinates, gathered class-score rows [k, C'], and the confidences that
// ranked them (non-increasing).
struct SelectedPoints {
  std::vector<std::size_t> indices;
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  Tensor features;
  std::vector<double> confidences;
};

// Every feature point classified independently by a shared 1x1 linear map.
class PixelClassifier {
public:
  PixelClassifier() = default;
  PixelClassifier(std::size_t in_channels, std::size_t num_classes, std::uint64_t seed);

  PixelLogits classify(const Tensor& fmap) const; // [C,H,W] -> [C',H,W]

  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  void save(ArrayStore& store, const std::string& prefix) const;
  void load(const ArrayStore& store, const std::string& prefix);
  Tensor& weight() { return w_; }
  Tensor& bias() { return b_; }

private:
  Tensor w_; // [C', C, 1, 1]
  Tensor b_; // [C']
};

// Confidence of each feature point: max over classes of the per-pixel class
// softmax. Pure data computation; selection is non-differentiable routing.
Tensor pixel_confidence(const PixelLogits& logits);

// Top-k skeleton over a confidence map: first k entries of the descending
// stable argsort of the flattened map.
SelectedPoints select(const Tensor& confidence, std::size_t k);

// Fill a skeleton's features by gathering logit rows at its indices
// (gradients flow through the gathered values only).
SelectedPoints gather_points(const PixelLogits& logits, SelectedPoints skeleton);

// One text record per point: block rank row col confidence. Consumed by the
// explanation overlay annotator.
std::string selection_dump(std::size_t block, const SelectedPoints& points);

} // namespace pim

#endif
