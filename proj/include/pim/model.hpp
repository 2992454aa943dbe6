#ifndef PIM_MODEL_HPP
#define PIM_MODEL_HPP

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "pim/backbone.hpp"
#include "pim/checkpoint.hpp"
#include "pim/combiner.hpp"
#include "pim/optim.hpp"
#include "pim/selector.hpp"
#include "pim/tensor.hpp"

namespace pim {

struct ModelConfig {
  BackboneConfig backbone;
  FpnConfig fpn;
  SelectionConfig selection;
  GcnConfig gcn;
  std::size_t num_classes = 4;
  LossWeights loss_weights;

  void validate() const;
  // selection counts after clamping to the configured resolution
  std::array<std::size_t, kNumBlocks> effective_n_sel(std::vector<std::string>* warnings = nullptr) const;
};

// Everything the pipeline produces for one image.
struct ForwardResult {
  FeatureMapSet raw_maps;  // backbone block outputs, [1,C,H,W]
  FeatureMapSet fpn_maps;  // projected maps, [1,fpn,H,W]
  std::array<PixelLogits, kNumBlocks> block_logits;
  std::vector<SelectedPoints> selected; // one per block
  Tensor combiner_scores;               // [C']

  std::size_t predicted_class() const;
};

// Backbone -> FPN -> per-block pixel classification -> top-k selection ->
// graph fusion. One image at a time; batching is gradient accumulation.
class PimModel {
public:
  PimModel() = default;
  PimModel(const ModelConfig& config, std::uint64_t seed);

  // image: [1,R,R] or [1,1,R,R]
  ForwardResult forward(const Tensor& image) const;

  TotalLoss loss(const ForwardResult& result, std::size_t label) const;

  const ModelConfig& config() const { return config_; }
  NamedParams parameters() const;
  void zero_grads();

  void save(const std::string& path) const;
  void load(const std::string& path);
  void save_into(ArrayStore& store) const;
  void load_from(const ArrayStore& store);

private:
  ModelConfig config_;
  std::array<std::size_t, kNumBlocks> n_sel_{};
  Backbone backbone_;
  FpnProjector fpn_;
  std::array<PixelClassifier, kNumBlocks> classifiers_;
  GcnCombiner combiner_;
};

} // namespace pim

#endif
