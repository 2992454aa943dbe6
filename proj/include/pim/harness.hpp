#ifndef PIM_HARNESS_HPP
#define PIM_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pim/dataset.hpp"
#include "pim/gradcam.hpp"
#include "pim/metrics.hpp"
#include "pim/model.hpp"
#include "pim/optim.hpp"

namespace pim {

// CLI exit-code mapping: 1 config, 2 data, 3 numeric.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::size_t resolution = 64;
  std::size_t batch_size = 16;
  std::size_t epochs = 100;
  std::string optimizer = "lion"; // lion|sgd|adamw
  LionConfig lion;
  SgdConfig sgd;
  AdamWConfig adamw;
  ModelConfig model;
  std::uint64_t seed = 0;
  std::string manifest_path;
  std::string images_root;

  void validate() const;
  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig from_json_file(const std::string& path);

  // Desk-scale defaults: small backbone, narrow FPN, selection counts that
  // fit the 64-px maps, optimizer rates that move a cold model in tens of
  // epochs. The published-scale values stay reachable through config.
  static RunConfig toy_default();
};

struct Sample {
  Tensor image; // [1,R,R]
  std::size_t label = 0;
  std::string id;
};

struct DataSet {
  std::vector<Sample> samples;
  std::size_t num_classes = 0;
  std::vector<std::string> group_ids; // leakage families, parallel to samples
};

// Synthetic fine-grained set: identical noise background everywhere, class
// identity carried only by a 4x4 glyph (solid / horizontal stripes /
// vertical stripes / checker) stamped at a random position.
DataSet make_synthetic_dataset(std::size_t per_class, std::size_t resolution, std::uint64_t seed);

// Two classes with fixed disjoint patch regions; used by explanation tests.
DataSet make_two_patch_dataset(std::size_t per_class, std::size_t resolution, std::uint64_t seed);
// the stamped region for a class: (row0, col0, row1, col1), half-open
std::array<std::size_t, 4> two_patch_region(std::size_t class_index, std::size_t resolution);

// Materialize a manifest split (applies the persisted whitening when the
// manifest calls for it).
DataSet load_split(const Manifest& manifest, const std::string& split, const std::string& images_root,
                   const std::string& manifest_dir, std::size_t resolution);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;

  std::string to_json() const;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<std::string> step_records; // one JSON object per optimizer step
  double best_val_accuracy = 0.0;
  std::size_t best_epoch = 0;
  ArrayStore best_checkpoint; // weights at the best validation epoch
};

// Deterministic full training run; the model is left at its final weights.
TrainResult train_model(PimModel& model, const DataSet& train, const DataSet& val,
                        const RunConfig& config);

MetricsReport evaluate_model(const PimModel& model, const DataSet& data);

KfoldSummary kfold_run(const DataSet& all, const RunConfig& config, std::size_t k,
                       std::size_t epochs_per_fold);

struct AblationRow {
  std::string variant;
  std::optional<double> test1_accuracy;
  std::optional<double> test2_accuracy;
  std::string error; // non-empty when this variant failed

  std::string to_json() const;
};

enum class AblationAxis { NumSelections, FpnSize };

// Train/evaluate one model per value with the shared seed; per-variant
// failures are reported in their row without aborting the sweep.
std::vector<AblationRow> ablate(const RunConfig& base, AblationAxis axis,
                                const std::vector<std::vector<std::size_t>>& values,
                                const DataSet& train, const DataSet& val,
                                const DataSet* test1, const DataSet* test2);

std::string render_ablation_table(const std::string& axis_name, const std::vector<AblationRow>& rows);

// Accuracy-improvement ladder: the four stock configurations with reference
// accuracies from the full-scale experiments alongside measured ones.
struct LadderRow {
  std::string name;
  std::optional<double> test1_accuracy;
  std::optional<double> test2_accuracy;
  double reference_test1 = 0.0;
  double reference_test2 = 0.0;
};
std::vector<LadderRow> ladder_rows(); // names + reference values, measurements empty
std::string render_ladder(const std::vector<LadderRow>& rows);

struct ExplainOutput {
  std::string png_path;
  std::string sidecar_path;
  std::size_t class_index = 0;
  std::size_t layer = 0;
};

// Grad-CAM for one sample: forward under a fresh tape, backward from the
// combiner's pre-softmax score, heatmap from the chosen block's activations.
ExplainOutput explain_sample(const PimModel& model, const Sample& sample,
                             std::optional<std::size_t> class_index,
                             const CamRequest& request, const std::string& out_dir);

Heatmap compute_cam(const PimModel& model, const Tensor& image, std::size_t class_index,
                    const CamRequest& request, ForwardResult* result_out = nullptr);

} // namespace pim

#endif
