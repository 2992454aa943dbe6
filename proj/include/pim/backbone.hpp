#ifndef PIM_BACKBONE_HPP
#define PIM_BACKBONE_HPP

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "pim/checkpoint.hpp"
#include "pim/tensor.hpp"

namespace pim {

inline constexpr std::size_t kNumBlocks = 4;

// Four-stage convolutional feature extractor. Each block is
// conv(k,k stride 1, same padding) -> ReLU -> conv(k,k stride block_stride),
// so any backbone exposing four multi-scale maps can replace it behind the
// same interface.
struct BackboneConfig {
  std::size_t input_resolution = 64;
  std::array<std::size_t, kNumBlocks> block_channels{16, 32, 64, 128};
  std::array<std::size_t, kNumBlocks> block_strides{2, 2, 2, 2};
  std::size_t conv_kernel = 3;

  void validate() const;
  // spatial extent of block b's output (b in [0,4))
  std::size_t block_extent(std::size_t b) const;
};

// The four per-block maps. Tensors are [N, C_b, H_b, W_b] with H/W strictly
// non-increasing in b.
struct FeatureMapSet {
  std::array<Tensor, kNumBlocks> maps;
};

struct FpnConfig {
  std::size_t fpn_size = 1536;

  void validate(std::size_t num_classes) const;
};

class Backbone {
public:
  Backbone() = default;
  Backbone(const BackboneConfig& config, std::uint64_t seed);

  FeatureMapSet forward(const Tensor& batch) const;

  const BackboneConfig& config() const { return config_; }
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  void save(ArrayStore& store, const std::string& prefix) const;
  void load(const ArrayStore& store, const std::string& prefix);

private:
  struct Block {
    Tensor w1, b1; // stride-1 conv
    Tensor w2, b2; // stride-s conv
  };
  BackboneConfig config_;
  std::array<Block, kNumBlocks> blocks_;
};

// 1x1 projection of every block to fpn_size channels followed by a top-down
// pathway: the coarser projected map is nearest-neighbor upsampled and added
// to the next finer one. Output spatial extents match the inputs.
class FpnProjector {
public:
  FpnProjector() = default;
  FpnProjector(const BackboneConfig& backbone, const FpnConfig& config, std::uint64_t seed);

  FeatureMapSet forward(const FeatureMapSet& fmaps) const;

  const FpnConfig& config() const { return config_; }
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  void save(ArrayStore& store, const std::string& prefix) const;
  void load(const ArrayStore& store, const std::string& prefix);

  // test hook: identity-like projection (only meaningful when
  // fpn_size == block channels)
  void set_identity();

private:
  FpnConfig config_;
  std::array<std::size_t, kNumBlocks> strides_{};
  std::array<Tensor, kNumBlocks> proj_w_;
  std::array<Tensor, kNumBlocks> proj_b_;
};

} // namespace pim

#endif
