#include "pim/combiner.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pim/rng.hpp"

namespace pim {

void GcnConfig::validate() const {
  if (num_supernodes == 0) throw std::invalid_argument("num_supernodes must be positive");
  if (gcn_layers == 0) throw std::invalid_argument("gcn_layers must be positive");
  if (adjacency_temperature <= 0.0) throw std::invalid_argument("adjacency temperature must be positive");
}

std::string LossReport::to_json(std::size_t epoch, std::size_t step) const {
  std::ostringstream os;
  os.precision(12);
  os << "{\"epoch\":" << epoch << ",\"step\":" << step << ",\"block_losses\":[";
  for (std::size_t b = 0; b < kNumBlocks; ++b) os << (b ? "," : "") << block_losses[b];
  os << "],\"combiner_loss\":" << combiner_loss << ",\"total\":" << total << "}";
  return os.str();
}

Tensor concat_features(const std::vector<SelectedPoints>& per_block) {
  std::vector<Tensor> parts;
  parts.reserve(per_block.size());
  for (const auto& p : per_block) {
    if (!p.features.defined()) throw std::invalid_argument("selected points lack gathered features");
    parts.push_back(p.features);
  }
  return concat_rows(parts);
}

ConcatHead::ConcatHead(std::size_t total_points, std::size_t num_classes, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, /*tag=*/0xc04c);
  const std::size_t in = total_points * num_classes;
  std::vector<double> w(in * num_classes);
  const double stddev = std::sqrt(1.0 / static_cast<double>(in));
  for (auto& v : w) v = rng.normal(0.0, stddev);
  w_ = Tensor::from_data({in, num_classes}, std::move(w), true);
  b_ = Tensor::zeros({num_classes}, true);
}

Tensor ConcatHead::predict(const Tensor& concat) const {
  if (concat.rank() != 2) {
    throw std::invalid_argument("concat head expects [N,C'], got " + shape_to_string(concat.shape()));
  }
  const std::size_t flat = concat.size();
  if (flat != w_.extent(0)) {
    throw std::invalid_argument("concat head sized for " + std::to_string(w_.extent(0)) +
                                " inputs, got " + std::to_string(flat));
  }
  Tensor row = reshape(concat, {1, flat});
  Tensor scores = add_rowwise(matmul(row, w_), b_);
  return reshape(scores, {w_.extent(1)});
}

std::vector<std::pair<std::string, Tensor>> ConcatHead::named_parameters() const {
  return {{"w", w_}, {"b", b_}};
}

GcnCombiner::GcnCombiner(std::size_t num_classes, const GcnConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  Rng rng = Rng::derive(seed, /*tag=*/0x9c42);
  const double stddev = std::sqrt(1.0 / static_cast<double>(num_classes));
  auto init = [&](std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> data(n);
    for (auto& v : data) v = rng.normal(0.0, stddev);
    return Tensor::from_data(std::move(shape), std::move(data), true);
  };
  theta_.clear();
  for (std::size_t l = 0; l < config_.gcn_layers; ++l) {
    // near-identity message transform keeps early training stable
    Tensor t = init({num_classes, num_classes});
    for (std::size_t i = 0; i < num_classes; ++i) t.mutable_data()[i * num_classes + i] += 1.0;
    theta_.push_back(t);
  }
  assign_ = init({num_classes, config_.num_supernodes});
  out_w_ = init({num_classes, num_classes});
  out_b_ = Tensor::zeros({num_classes}, true);
}

Tensor GcnCombiner::fuse(const Tensor& nodes) const {
  if (nodes.rank() != 2) {
    throw std::invalid_argument("gcn expects [N,C'], got " + shape_to_string(nodes.shape()));
  }
  const std::size_t n = nodes.extent(0);
  if (n < config_.num_supernodes) {
    throw std::invalid_argument("fewer nodes (" + std::to_string(n) + ") than supernodes (" +
                                std::to_string(config_.num_supernodes) + ")");
  }
  // adjacency from feature similarity, fixed for all message rounds
  Tensor sim = scale(matmul(nodes, transpose(nodes)), 1.0 / config_.adjacency_temperature);
  Tensor adjacency = softmax(sim, 1);
  Tensor x = nodes;
  for (const Tensor& theta : theta_) {
    x = relu(matmul(matmul(adjacency, x), theta));
  }
  // soft assignment pools nodes into supernodes; each column sums to one
  Tensor assignment = softmax(matmul(x, assign_), 0);  // [N, K]
  Tensor pooled = matmul(transpose(assignment), x);    // [K, C']
  Tensor averaged = reduce_mean(pooled, 0);            // [C']
  Tensor scores = add_rowwise(matmul(reshape(averaged, {1, averaged.size()}), out_w_), out_b_);
  return reshape(scores, {out_b_.size()});
}

std::vector<std::pair<std::string, Tensor>> GcnCombiner::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> params;
  for (std::size_t l = 0; l < theta_.size(); ++l) {
    params.emplace_back("theta" + std::to_string(l + 1), theta_[l]);
  }
  params.emplace_back("assign", assign_);
  params.emplace_back("out.w", out_w_);
  params.emplace_back("out.b", out_b_);
  return params;
}

void GcnCombiner::save(ArrayStore& store, const std::string& prefix) const {
  for (const auto& [name, t] : named_parameters()) store.put(prefix + name, t.shape(), t.data());
}

void GcnCombiner::load(const ArrayStore& store, const std::string& prefix) {
  for (auto& [name, t] : named_parameters()) t.mutable_data() = store.data(prefix + name);
}

Tensor average_predict(const PixelLogits& logits) {
  // mean over W then H leaves the class axis
  return reduce_mean(reduce_mean(logits.logits, 2), 1);
}

Tensor cross_entropy(const Tensor& scores, std::size_t label) {
  if (scores.rank() != 1) {
    throw std::invalid_argument("cross_entropy expects a score vector, got " + shape_to_string(scores.shape()));
  }
  if (label >= scores.size()) {
    throw std::invalid_argument("label " + std::to_string(label) + " out of range for " +
                                std::to_string(scores.size()) + " classes");
  }
  Tensor probs = softmax(scores, 0);
  Tensor picked = gather_rows(reshape(probs, {probs.size(), 1}), {label});
  return scale(sum_all(pim::log(picked)), -1.0);
}

TotalLoss total_loss(const std::array<PixelLogits, kNumBlocks>& block_logits,
                     const Tensor& combiner_scores, std::size_t label,
                     const LossWeights& weights) {
  TotalLoss out;
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    Tensor lb = cross_entropy(average_predict(block_logits[b]), label);
    out.report.block_losses[b] = lb.item();
    acc = add(acc, scale(lb, weights.block[b]));
  }
  Tensor lc = cross_entropy(combiner_scores, label);
  out.report.combiner_loss = lc.item();
  acc = add(acc, scale(lc, weights.combiner));
  out.value = acc;
  out.report.total = acc.item();
  return out;
}

} // namespace pim
