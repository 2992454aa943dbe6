#include "pim/model.hpp"

#include <stdexcept>

namespace pim {

void ModelConfig::validate() const {
  backbone.validate();
  if (num_classes < 2) throw std::invalid_argument("need at least two classes");
  fpn.validate(num_classes);
  gcn.validate();
}

std::array<std::size_t, kNumBlocks> ModelConfig::effective_n_sel(std::vector<std::string>* warnings) const {
  std::array<std::size_t, kNumBlocks> spatial{};
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const std::size_t e = backbone.block_extent(b);
    spatial[b] = e * e;
  }
  return selection.clamped_for(spatial, warnings);
}

PimModel::PimModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  n_sel_ = config_.effective_n_sel();
  std::size_t total = 0;
  for (std::size_t b = 0; b < kNumBlocks; ++b) total += n_sel_[b];
  if (total < config_.gcn.num_supernodes) {
    throw std::invalid_argument("total selected points below supernode count");
  }
  backbone_ = Backbone(config_.backbone, seed);
  fpn_ = FpnProjector(config_.backbone, config_.fpn, seed + 1);
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    classifiers_[b] = PixelClassifier(config_.fpn.fpn_size, config_.num_classes, seed + 2 + b);
  }
  combiner_ = GcnCombiner(config_.num_classes, config_.gcn, seed + 10);
}

ForwardResult PimModel::forward(const Tensor& image) const {
  Tensor batch = image;
  if (batch.rank() == 3) {
    batch = reshape(batch, {1, batch.extent(0), batch.extent(1), batch.extent(2)});
  }
  ForwardResult out;
  out.raw_maps = backbone_.forward(batch);
  out.fpn_maps = fpn_.forward(out.raw_maps);
  out.selected.reserve(kNumBlocks);
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const Tensor& map4 = out.fpn_maps.maps[b];
    Tensor map3 = reshape(map4, {map4.extent(1), map4.extent(2), map4.extent(3)});
    out.block_logits[b] = classifiers_[b].classify(map3);
    Tensor confidence = pixel_confidence(out.block_logits[b]);
    SelectedPoints skeleton = select(confidence, n_sel_[b]);
    out.selected.push_back(gather_points(out.block_logits[b], std::move(skeleton)));
  }
  Tensor nodes = concat_features(out.selected);
  out.combiner_scores = combiner_.fuse(nodes);
  return out;
}

std::size_t ForwardResult::predicted_class() const {
  const auto& scores = combiner_scores.data();
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

TotalLoss PimModel::loss(const ForwardResult& result, std::size_t label) const {
  if (label >= config_.num_classes) {
    throw std::invalid_argument("label " + std::to_string(label) + " out of range");
  }
  return total_loss(result.block_logits, result.combiner_scores, label, config_.loss_weights);
}

NamedParams PimModel::parameters() const {
  NamedParams params;
  for (const auto& [name, t] : backbone_.named_parameters()) params.emplace_back("backbone." + name, t);
  for (const auto& [name, t] : fpn_.named_parameters()) params.emplace_back("fpn." + name, t);
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    for (const auto& [name, t] : classifiers_[b].named_parameters()) {
      params.emplace_back("selector" + std::to_string(b + 1) + "." + name, t);
    }
  }
  for (const auto& [name, t] : combiner_.named_parameters()) params.emplace_back("combiner." + name, t);
  return params;
}

void PimModel::zero_grads() {
  for (auto& [name, t] : parameters()) t.zero_grad();
}

void PimModel::save_into(ArrayStore& store) const {
  for (const auto& [name, t] : parameters()) store.put("model." + name, t.shape(), t.data());
}

void PimModel::load_from(const ArrayStore& store) {
  for (auto& [name, t] : parameters()) {
    const auto& data = store.data("model." + name);
    if (data.size() != t.size()) {
      throw std::runtime_error("checkpoint array 'model." + name + "' has wrong size");
    }
    t.mutable_data() = data;
  }
}

void PimModel::save(const std::string& path) const {
  ArrayStore store;
  save_into(store);
  store.save(path);
}

void PimModel::load(const std::string& path) {
  load_from(ArrayStore::load(path));
}

} // namespace pim
