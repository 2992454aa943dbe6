#include "pim/backbone.hpp"

#include <cmath>
#include <stdexcept>

#include "pim/rng.hpp"

namespace pim {

namespace {

Tensor he_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> data(n);
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : data) v = rng.normal(0.0, stddev);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

} // namespace

void BackboneConfig::validate() const {
  std::size_t stride_product = 1;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    if (block_channels[b] == 0) throw std::invalid_argument("block channels must be positive");
    if (block_strides[b] == 0) throw std::invalid_argument("block strides must be positive");
    stride_product *= block_strides[b];
  }
  if (conv_kernel % 2 == 0 || conv_kernel == 0) {
    throw std::invalid_argument("conv kernel must be odd, got " + std::to_string(conv_kernel));
  }
  if (input_resolution == 0 || input_resolution % stride_product != 0) {
    throw std::invalid_argument("input resolution " + std::to_string(input_resolution) +
                                " not divisible by stride product " + std::to_string(stride_product));
  }
}

std::size_t BackboneConfig::block_extent(std::size_t b) const {
  std::size_t e = input_resolution;
  for (std::size_t i = 0; i <= b; ++i) e /= block_strides[i];
  return e;
}

void FpnConfig::validate(std::size_t num_classes) const {
  if (fpn_size == 0) throw std::invalid_argument("fpn_size must be positive");
  if (fpn_size < num_classes) {
    throw std::invalid_argument("fpn_size " + std::to_string(fpn_size) +
                                " smaller than class count " + std::to_string(num_classes));
  }
}

Backbone::Backbone(const BackboneConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng = Rng::derive(seed, /*tag=*/0xbac0);
  std::size_t in_ch = 1;
  const std::size_t k = config_.conv_kernel;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const std::size_t out_ch = config_.block_channels[b];
    blocks_[b].w1 = he_init({out_ch, in_ch, k, k}, in_ch * k * k, rng);
    blocks_[b].b1 = Tensor::zeros({out_ch}, true);
    blocks_[b].w2 = he_init({out_ch, out_ch, k, k}, out_ch * k * k, rng);
    blocks_[b].b2 = Tensor::zeros({out_ch}, true);
    in_ch = out_ch;
  }
}

FeatureMapSet Backbone::forward(const Tensor& batch) const {
  if (batch.rank() != 4 || batch.extent(1) != 1) {
    throw std::invalid_argument("backbone expects [N,1,R,R], got " + shape_to_string(batch.shape()));
  }
  if (batch.extent(2) != config_.input_resolution || batch.extent(3) != config_.input_resolution) {
    throw std::invalid_argument("backbone resolution mismatch: configured " +
                                std::to_string(config_.input_resolution) + ", got " +
                                shape_to_string(batch.shape()));
  }
  const std::size_t pad = config_.conv_kernel / 2;
  FeatureMapSet out;
  Tensor x = batch;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    Tensor h = relu(add_channel_bias(conv2d(x, blocks_[b].w1, 1, pad), blocks_[b].b1));
    x = add_channel_bias(conv2d(h, blocks_[b].w2, config_.block_strides[b], pad), blocks_[b].b2);
    out.maps[b] = x;
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> Backbone::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> params;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const std::string base = "block" + std::to_string(b + 1);
    params.emplace_back(base + ".conv1.w", blocks_[b].w1);
    params.emplace_back(base + ".conv1.b", blocks_[b].b1);
    params.emplace_back(base + ".conv2.w", blocks_[b].w2);
    params.emplace_back(base + ".conv2.b", blocks_[b].b2);
  }
  return params;
}

void Backbone::save(ArrayStore& store, const std::string& prefix) const {
  for (const auto& [name, t] : named_parameters()) store.put(prefix + name, t.shape(), t.data());
}

void Backbone::load(const ArrayStore& store, const std::string& prefix) {
  for (auto& [name, t] : named_parameters()) {
    const auto& data = store.data(prefix + name);
    if (data.size() != t.size()) {
      throw std::runtime_error("checkpoint array '" + prefix + name + "' has wrong size");
    }
    t.mutable_data() = data;
  }
}

FpnProjector::FpnProjector(const BackboneConfig& backbone, const FpnConfig& config, std::uint64_t seed)
    : config_(config), strides_(backbone.block_strides) {
  Rng rng = Rng::derive(seed, /*tag=*/0xf9a1);
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const std::size_t in_ch = backbone.block_channels[b];
    proj_w_[b] = he_init({config_.fpn_size, in_ch, 1, 1}, in_ch, rng);
    proj_b_[b] = Tensor::zeros({config_.fpn_size}, true);
  }
}

FeatureMapSet FpnProjector::forward(const FeatureMapSet& fmaps) const {
  std::array<Tensor, kNumBlocks> projected;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    projected[b] = add_channel_bias(conv2d(fmaps.maps[b], proj_w_[b], 1, 0), proj_b_[b]);
  }
  FeatureMapSet out;
  out.maps[kNumBlocks - 1] = projected[kNumBlocks - 1];
  for (std::size_t b = kNumBlocks - 1; b-- > 0;) {
    // coarser map has 1/stride of this block's extent
    const std::size_t factor = strides_[b + 1];
    out.maps[b] = add(projected[b], upsample_nearest(out.maps[b + 1], factor));
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> FpnProjector::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> params;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const std::string base = "proj" + std::to_string(b + 1);
    params.emplace_back(base + ".w", proj_w_[b]);
    params.emplace_back(base + ".b", proj_b_[b]);
  }
  return params;
}

void FpnProjector::save(ArrayStore& store, const std::string& prefix) const {
  for (const auto& [name, t] : named_parameters()) store.put(prefix + name, t.shape(), t.data());
}

void FpnProjector::load(const ArrayStore& store, const std::string& prefix) {
  for (auto& [name, t] : named_parameters()) {
    const auto& data = store.data(prefix + name);
    if (data.size() != t.size()) {
      throw std::runtime_error("checkpoint array '" + prefix + name + "' has wrong size");
    }
    t.mutable_data() = data;
  }
}

void FpnProjector::set_identity() {
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    auto& w = proj_w_[b].mutable_data();
    std::fill(w.begin(), w.end(), 0.0);
    const std::size_t in_ch = proj_w_[b].extent(1);
    for (std::size_t c = 0; c < std::min(config_.fpn_size, in_ch); ++c) w[c * in_ch + c] = 1.0;
    auto& bias = proj_b_[b].mutable_data();
    std::fill(bias.begin(), bias.end(), 0.0);
  }
}

} // namespace pim
