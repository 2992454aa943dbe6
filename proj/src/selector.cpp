#include "pim/selector.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pim/rng.hpp"

namespace pim {

std::array<std::size_t, kNumBlocks> SelectionConfig::clamped_for(
    const std::array<std::size_t, kNumBlocks>& spatial_sizes,
    std::vector<std::string>* warnings) const {
  std::array<std::size_t, kNumBlocks> out{};
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    if (n_sel[b] == 0) throw std::invalid_argument("selection count must be positive");
    out[b] = n_sel[b];
    if (out[b] > spatial_sizes[b]) {
      out[b] = spatial_sizes[b];
      if (warnings) {
        warnings->push_back("block " + std::to_string(b + 1) + ": n_sel " +
                            std::to_string(n_sel[b]) + " clamped to " + std::to_string(out[b]));
      }
    }
  }
  return out;
}

PixelClassifier::PixelClassifier(std::size_t in_channels, std::size_t num_classes, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, /*tag=*/0x5e1e);
  std::vector<double> w(num_classes * in_channels);
  const double stddev = std::sqrt(1.0 / static_cast<double>(in_channels));
  for (auto& v : w) v = rng.normal(0.0, stddev);
  w_ = Tensor::from_data({num_classes, in_channels, 1, 1}, std::move(w), true);
  b_ = Tensor::zeros({num_classes}, true);
}

PixelLogits PixelClassifier::classify(const Tensor& fmap) const {
  if (fmap.rank() != 3) {
    throw std::invalid_argument("classify expects [C,H,W], got " + shape_to_string(fmap.shape()));
  }
  if (fmap.extent(0) != w_.extent(1)) {
    throw std::invalid_argument("classifier width " + std::to_string(w_.extent(1)) +
                                " vs feature channels " + std::to_string(fmap.extent(0)));
  }
  const std::size_t c = fmap.extent(0), h = fmap.extent(1), w = fmap.extent(2);
  Tensor batched = reshape(fmap, {1, c, h, w});
  Tensor scores = add_channel_bias(conv2d(batched, w_, 1, 0), b_);
  return PixelLogits{reshape(scores, {w_.extent(0), h, w})};
}

std::vector<std::pair<std::string, Tensor>> PixelClassifier::named_parameters() const {
  return {{"w", w_}, {"b", b_}};
}

void PixelClassifier::save(ArrayStore& store, const std::string& prefix) const {
  store.put(prefix + "w", w_.shape(), w_.data());
  store.put(prefix + "b", b_.shape(), b_.data());
}

void PixelClassifier::load(const ArrayStore& store, const std::string& prefix) {
  w_.mutable_data() = store.data(prefix + "w");
  b_.mutable_data() = store.data(prefix + "b");
}

Tensor pixel_confidence(const PixelLogits& logits) {
  const std::size_t c = logits.num_classes(), h = logits.height(), w = logits.width();
  const auto& d = logits.logits.data();
  std::vector<double> conf(h * w);
  for (std::size_t s = 0; s < h * w; ++s) {
    double mx = d[s];
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, d[k * h * w + s]);
    double denom = 0.0, top = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const double e = std::exp(d[k * h * w + s] - mx);
      denom += e;
      top = std::max(top, e);
    }
    conf[s] = top / denom;
  }
  return Tensor::from_data({h, w}, std::move(conf));
}

SelectedPoints select(const Tensor& confidence, std::size_t k) {
  if (confidence.rank() != 2) {
    throw std::invalid_argument("select expects [H,W], got " + shape_to_string(confidence.shape()));
  }
  const std::size_t w = confidence.extent(1);
  if (k > confidence.size()) {
    throw std::invalid_argument("k=" + std::to_string(k) + " exceeds H*W=" + std::to_string(confidence.size()));
  }
  SelectedPoints points;
  points.indices = topk_indices(confidence, k);
  points.coords.reserve(k);
  points.confidences.reserve(k);
  for (std::size_t idx : points.indices) {
    points.coords.emplace_back(idx / w, idx % w);
    points.confidences.push_back(confidence.at(idx));
  }
  return points;
}

SelectedPoints gather_points(const PixelLogits& logits, SelectedPoints skeleton) {
  const std::size_t hw = logits.height() * logits.width();
  for (std::size_t idx : skeleton.indices) {
    if (idx >= hw) throw std::out_of_range("selection index " + std::to_string(idx) + " out of range");
  }
  Tensor rows = pixels_as_rows(logits.logits); // [H*W, C']
  skeleton.features = gather_rows(rows, skeleton.indices);
  return skeleton;
}

std::string selection_dump(std::size_t block, const SelectedPoints& points) {
  std::ostringstream os;
  for (std::size_t r = 0; r < points.indices.size(); ++r) {
    os << block << " " << r << " " << points.coords[r].first << " " << points.coords[r].second
       << " " << points.confidences[r] << "\n";
  }
  return os.str();
}

} // namespace pim
