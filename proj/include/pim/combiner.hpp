#ifndef PIM_COMBINER_HPP
#define PIM_COMBINER_HPP

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "pim/checkpoint.hpp"
#include "pim/selector.hpp"
#include "pim/tensor.hpp"

namespace pim {

struct GcnConfig {
  std::size_t num_supernodes = 4;
  std::size_t gcn_layers = 1;
  double adjacency_temperature = 1.0;

  void validate() const;
};

// Per-image loss breakdown: one cross-entropy term per block plus the
// combiner head's, all nonnegative, total = weighted sum.
struct LossReport {
  std::array<double, kNumBlocks> block_losses{};
  double combiner_loss = 0.0;
  double total = 0.0;

  std::string to_json(std::size_t epoch, std::size_t step) const;
};

// Loss weights; unit by default.
struct LossWeights {
  std::array<double, kNumBlocks> block{1.0, 1.0, 1.0, 1.0};
  double combiner = 1.0;
};

// Stack per-block selected features into one node matrix [N_total, C'].
Tensor concat_features(const std::vector<SelectedPoints>& per_block);

// Eq-style concatenation head: flatten the node matrix and apply one fully
// connected layer. Kept alongside the graph combiner for the plain-fusion
// path.
class ConcatHead {
public:
  ConcatHead() = default;
  ConcatHead(std::size_t total_points, std::size_t num_classes, std::uint64_t seed);

  Tensor predict(const Tensor& concat) const; // [N_total, C'] -> [C']

  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

private:
  Tensor w_; // [(N_total*C'), C']
  Tensor b_; // [C']
};

// Graph-convolution fusion: similarity adjacency, message passing, soft
// pooling to supernodes, average, linear classifier.
class GcnCombiner {
public:
  GcnCombiner() = default;
  GcnCombiner(std::size_t num_classes, const GcnConfig& config, std::uint64_t seed);

  // [N, C'] node features -> [C'] class scores
  Tensor fuse(const Tensor& nodes) const;

  const GcnConfig& config() const { return config_; }
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  void save(ArrayStore& store, const std::string& prefix) const;
  void load(const ArrayStore& store, const std::string& prefix);

private:
  GcnConfig config_;
  std::vector<Tensor> theta_; // per layer [C', C']
  Tensor assign_;             // [C', num_supernodes]
  Tensor out_w_;              // [C', C']
  Tensor out_b_;              // [C']
};

// Mean class-score vector over all feature points of a block.
Tensor average_predict(const PixelLogits& logits); // -> [C']

// Cross entropy of softmax(v) against an integer label.
Tensor cross_entropy(const Tensor& scores, std::size_t label);

// Assemble the per-block and combiner losses into a report plus the scalar
// training objective.
struct TotalLoss {
  LossReport report;
  Tensor value; // scalar, on tape
};
TotalLoss total_loss(const std::array<PixelLogits, kNumBlocks>& block_logits,
                     const Tensor& combiner_scores, std::size_t label,
                     const LossWeights& weights = {});

} // namespace pim

#endif
