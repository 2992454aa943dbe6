#include "pim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <variant>

#include "json.hpp"
#include "pim/image.hpp"
#include "pim/rng.hpp"
#include "pim/selector.hpp"

namespace pim {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
  if (resolution == 0 || batch_size == 0 || epochs == 0) {
    throw ConfigError("resolution, batch_size and epochs must be positive");
  }
  if (optimizer != "lion" && optimizer != "sgd" && optimizer != "adamw") {
    throw ConfigError("unknown optimizer '" + optimizer + "'");
  }
  try {
    lion.validate();
    sgd.validate();
    adamw.validate();
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (model.backbone.input_resolution != resolution) {
    throw ConfigError("model backbone resolution differs from run resolution");
  }
}

RunConfig RunConfig::toy_default() {
  RunConfig c;
  c.resolution = 64;
  c.batch_size = 16;
  c.epochs = 50;
  c.optimizer = "lion";
  c.lion.delta = 2e-3;
  c.sgd.lr = 0.05;
  c.sgd.momentum = 0.9;
  c.adamw.lr = 2e-3;
  c.model.backbone.input_resolution = 64;
  c.model.backbone.block_channels = {8, 16, 32, 64};
  c.model.backbone.block_strides = {2, 2, 2, 2};
  c.model.backbone.conv_kernel = 3;
  c.model.fpn.fpn_size = 32;
  c.model.selection.n_sel = {64, 32, 16, 8};
  c.model.num_classes = 4;
  return c;
}

std::string RunConfig::to_json() const {
  json j;
  j["resolution"] = resolution;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["optimizer"] = optimizer;
  j["lion"] = {{"alpha", lion.alpha}, {"beta", lion.beta}, {"gamma", lion.gamma}, {"delta", lion.delta}};
  j["sgd"] = {{"lr", sgd.lr}, {"momentum", sgd.momentum}};
  j["adamw"] = {{"lr", adamw.lr}, {"beta1", adamw.beta1}, {"beta2", adamw.beta2},
                {"eps", adamw.eps}, {"weight_decay", adamw.weight_decay}};
  j["block_channels"] = model.backbone.block_channels;
  j["block_strides"] = model.backbone.block_strides;
  j["conv_kernel"] = model.backbone.conv_kernel;
  j["fpn_size"] = model.fpn.fpn_size;
  j["n_sel"] = model.selection.n_sel;
  j["gcn"] = {{"num_supernodes", model.gcn.num_supernodes},
              {"gcn_layers", model.gcn.gcn_layers},
              {"adjacency_temperature", model.gcn.adjacency_temperature}};
  j["num_classes"] = model.num_classes;
  j["loss_weights"] = {{"blocks", model.loss_weights.block}, {"combiner", model.loss_weights.combiner}};
  j["seed"] = seed;
  j["manifest"] = manifest_path;
  j["images_root"] = images_root;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse failure: ") + e.what());
  }
  RunConfig c = toy_default();
  try {
    c.resolution = j.value("resolution", c.resolution);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.optimizer = j.value("optimizer", c.optimizer);
    if (j.contains("lion")) {
      const auto& l = j["lion"];
      c.lion.alpha = l.value("alpha", c.lion.alpha);
      c.lion.beta = l.value("beta", c.lion.beta);
      c.lion.gamma = l.value("gamma", c.lion.gamma);
      c.lion.delta = l.value("delta", c.lion.delta);
    }
    if (j.contains("sgd")) {
      const auto& s = j["sgd"];
      c.sgd.lr = s.value("lr", c.sgd.lr);
      c.sgd.momentum = s.value("momentum", c.sgd.momentum);
    }
    if (j.contains("adamw")) {
      const auto& a = j["adamw"];
      c.adamw.lr = a.value("lr", c.adamw.lr);
      c.adamw.beta1 = a.value("beta1", c.adamw.beta1);
      c.adamw.beta2 = a.value("beta2", c.adamw.beta2);
      c.adamw.eps = a.value("eps", c.adamw.eps);
      c.adamw.weight_decay = a.value("weight_decay", c.adamw.weight_decay);
    }
    if (j.contains("block_channels")) {
      auto v = j["block_channels"].get<std::vector<std::size_t>>();
      if (v.size() != kNumBlocks) throw ConfigError("block_channels needs exactly 4 entries");
      std::copy(v.begin(), v.end(), c.model.backbone.block_channels.begin());
    }
    if (j.contains("block_strides")) {
      auto v = j["block_strides"].get<std::vector<std::size_t>>();
      if (v.size() != kNumBlocks) throw ConfigError("block_strides needs exactly 4 entries");
      std::copy(v.begin(), v.end(), c.model.backbone.block_strides.begin());
    }
    c.model.backbone.conv_kernel = j.value("conv_kernel", c.model.backbone.conv_kernel);
    c.model.fpn.fpn_size = j.value("fpn_size", c.model.fpn.fpn_size);
    if (j.contains("n_sel")) {
      auto v = j["n_sel"].get<std::vector<std::size_t>>();
      if (v.size() != kNumBlocks) throw ConfigError("n_sel needs exactly 4 entries");
      std::copy(v.begin(), v.end(), c.model.selection.n_sel.begin());
    }
    if (j.contains("gcn")) {
      const auto& g = j["gcn"];
      c.model.gcn.num_supernodes = g.value("num_supernodes", c.model.gcn.num_supernodes);
      c.model.gcn.gcn_layers = g.value("gcn_layers", c.model.gcn.gcn_layers);
      c.model.gcn.adjacency_temperature = g.value("adjacency_temperature", c.model.gcn.adjacency_temperature);
    }
    c.model.num_classes = j.value("num_classes", c.model.num_classes);
    if (j.contains("loss_weights")) {
      const auto& w = j["loss_weights"];
      if (w.contains("blocks")) {
        auto v = w["blocks"].get<std::vector<double>>();
        if (v.size() != kNumBlocks) throw ConfigError("loss_weights.blocks needs exactly 4 entries");
        std::copy(v.begin(), v.end(), c.model.loss_weights.block.begin());
      }
      c.model.loss_weights.combiner = w.value("combiner", c.model.loss_weights.combiner);
    }
    c.seed = j.value("seed", c.seed);
    c.manifest_path = j.value("manifest", c.manifest_path);
    c.images_root = j.value("images_root", c.images_root);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field failure: ") + e.what());
  }
  c.model.backbone.input_resolution = c.resolution;
  c.validate();
  return c;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

// ---- synthetic data ---------------------------------------------------------

namespace {

void stamp_glyph(std::vector<double>& pixels, std::size_t resolution, std::size_t row,
                 std::size_t col, std::size_t class_index) {
  for (std::size_t dy = 0; dy < 4; ++dy) {
    for (std::size_t dx = 0; dx < 4; ++dx) {
      bool bright = false;
      switch (class_index % 4) {
        case 0: bright = true; break;                    // solid
        case 1: bright = dy % 2 == 0; break;             // horizontal stripes
        case 2: bright = dx % 2 == 0; break;             // vertical stripes
        case 3: bright = (dx + dy) % 2 == 0; break;      // checker
      }
      pixels[(row + dy) * resolution + (col + dx)] = bright ? 1.0 : 0.0;
    }
  }
}

} // namespace

DataSet make_synthetic_dataset(std::size_t per_class, std::size_t resolution, std::uint64_t seed) {
  if (resolution < 12) throw ConfigError("synthetic resolution too small");
  DataSet set;
  set.num_classes = 4;
  for (std::size_t cls = 0; cls < 4; ++cls) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Rng rng = Rng::derive(seed, /*tag=*/0x57a7, cls * 100003 + i);
      std::vector<double> pixels(resolution * resolution);
      for (auto& p : pixels) p = rng.uniform(0.0, 0.35);
      const std::size_t row = 2 + rng.below(resolution - 8);
      const std::size_t col = 2 + rng.below(resolution - 8);
      stamp_glyph(pixels, resolution, row, col, cls);
      Sample s;
      s.image = Tensor::from_data({1, resolution, resolution}, std::move(pixels));
      s.label = cls;
      s.id = "synth_c" + std::to_string(cls) + "_" + std::to_string(i);
      set.samples.push_back(std::move(s));
      set.group_ids.push_back(set.samples.back().id);
    }
  }
  return set;
}

std::array<std::size_t, 4> two_patch_region(std::size_t class_index, std::size_t resolution) {
  const std::size_t q = resolution / 4;
  if (class_index == 0) return {q, q, q + 4, q + 4};
  return {resolution - q - 4, resolution - q - 4, resolution - q, resolution - q};
}

DataSet make_two_patch_dataset(std::size_t per_class, std::size_t resolution, std::uint64_t seed) {
  DataSet set;
  set.num_classes = 2;
  for (std::size_t cls = 0; cls < 2; ++cls) {
    const auto region = two_patch_region(cls, resolution);
    for (std::size_t i = 0; i < per_class; ++i) {
      Rng rng = Rng::derive(seed, /*tag=*/0x2a7c, cls * 100003 + i);
      std::vector<double> pixels(resolution * resolution);
      for (auto& p : pixels) p = rng.uniform(0.0, 0.2);
      for (std::size_t y = region[0]; y < region[2]; ++y) {
        for (std::size_t x = region[1]; x < region[3]; ++x) {
          pixels[y * resolution + x] = 1.0;
        }
      }
      Sample s;
      s.image = Tensor::from_data({1, resolution, resolution}, std::move(pixels));
      s.label = cls;
      s.id = "patch_c" + std::to_string(cls) + "_" + std::to_string(i);
      set.samples.push_back(std::move(s));
      set.group_ids.push_back(set.samples.back().id);
    }
  }
  return set;
}

DataSet load_split(const Manifest& manifest, const std::string& split, const std::string& images_root,
                   const std::string& manifest_dir, std::size_t resolution) {
  DataSet set;
  set.num_classes = manifest.class_names.size();
  std::optional<ZcaWhitener> whitener;
  if (manifest.zca && !manifest.zca_path.empty()) {
    const fs::path zpath = fs::path(manifest_dir) / manifest.zca_path;
    whitener = ZcaWhitener::from_store(ArrayStore::load(zpath.string()));
  }
  DirectoryImageSource originals(images_root);
  DirectoryImageSource augmented(manifest_dir);
  for (const auto& r : manifest.records) {
    if (r.split != split) continue;
    std::vector<double> pixels = r.parent_id.empty() && !r.transform_log.size()
                                     ? originals.load(r.image_path, resolution)
                                     : augmented.load(r.image_path, resolution);
    if (whitener) pixels = whitener->apply(pixels);
    Sample s;
    s.image = Tensor::from_data({1, resolution, resolution}, std::move(pixels));
    s.label = manifest.label_of(r.class_name);
    s.id = r.image_id;
    set.samples.push_back(std::move(s));
    set.group_ids.push_back(r.parent_id.empty() ? r.image_id : r.parent_id);
  }
  if (set.samples.empty()) throw DataError("split '" + split + "' is empty");
  return set;
}

// ---- training ---------------------------------------------------------------

std::string EpochLog::to_json() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\"epoch\":" << epoch << ",\"train_loss\":" << train_loss
     << ",\"train_acc\":" << train_accuracy << ",\"val_loss\":" << val_loss
     << ",\"val_acc\":" << val_accuracy << "}";
  return os.str();
}

namespace {

struct AnyOptimizer {
  std::variant<Lion, Sgd, AdamW> impl;

  static AnyOptimizer make(const RunConfig& config, const NamedParams& params) {
    AnyOptimizer o;
    if (config.optimizer == "lion") o.impl = Lion(params, config.lion);
    else if (config.optimizer == "sgd") o.impl = Sgd(params, config.sgd);
    else o.impl = AdamW(params, config.adamw);
    return o;
  }

  bool step() {
    return std::visit([](auto& opt) { return opt.step(); }, impl);
  }
};

struct EvalLoss {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalLoss eval_loss_accuracy(const PimModel& model, const DataSet& data) {
  EvalLoss out;
  if (data.samples.empty()) return out;
  std::size_t correct = 0;
  for (const auto& s : data.samples) {
    ForwardResult r = model.forward(s.image); // no tape: pure inference
    out.loss += model.loss(r, s.label).report.total;
    if (r.predicted_class() == s.label) ++correct;
  }
  out.loss /= static_cast<double>(data.samples.size());
  out.accuracy = static_cast<double>(correct) / static_cast<double>(data.samples.size());
  return out;
}

} // namespace

TrainResult train_model(PimModel& model, const DataSet& train, const DataSet& val,
                        const RunConfig& config) {
  if (train.samples.empty()) throw DataError("training split is empty");
  if (train.num_classes != model.config().num_classes) {
    throw ConfigError("manifest has " + std::to_string(train.num_classes) +
                      " classes but the model expects " + std::to_string(model.config().num_classes));
  }
  TrainResult result;
  NamedParams params = model.parameters();
  AnyOptimizer optimizer = AnyOptimizer::make(config, params);

  std::vector<std::size_t> order(train.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = Rng::derive(config.seed, /*tag=*/0xe90c, epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, order.size());
      model.zero_grads();
      LossReport batch_report{};
      double batch_total = 0.0;
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = train.samples[order[i]];
        Tape tape;
        ForwardResult r = model.forward(s.image);
        TotalLoss l = model.loss(r, s.label);
        tape.backward(scale(l.value, inv));
        epoch_loss += l.report.total;
        batch_total += l.report.total;
        for (std::size_t b = 0; b < kNumBlocks; ++b) batch_report.block_losses[b] += l.report.block_losses[b];
        batch_report.combiner_loss += l.report.combiner_loss;
        if (r.predicted_class() == s.label) ++correct;
      }
      for (std::size_t b = 0; b < kNumBlocks; ++b) batch_report.block_losses[b] *= inv;
      batch_report.combiner_loss *= inv;
      batch_report.total = batch_total * inv;
      if (!optimizer.step()) {
        throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(global_step) + "; step rejected");
      }
      result.step_records.push_back(batch_report.to_json(epoch, global_step));
      ++global_step;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(train.samples.size());
    log.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.samples.size());
    if (!val.samples.empty()) {
      EvalLoss v = eval_loss_accuracy(model, val);
      log.val_loss = v.loss;
      log.val_accuracy = v.accuracy;
    }
    if (!std::isfinite(log.train_loss)) {
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
    }
    result.epochs.push_back(log);

    if (result.epochs.size() == 1 || log.val_accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = log.val_accuracy;
      result.best_epoch = epoch;
      result.best_checkpoint = ArrayStore();
      model.save_into(result.best_checkpoint);
    }
  }
  return result;
}

MetricsReport evaluate_model(const PimModel& model, const DataSet& data) {
  if (data.samples.empty()) throw DataError("evaluation split is empty");
  ConfusionMatrix cm(model.config().num_classes);
  for (const auto& s : data.samples) {
    ForwardResult r = model.forward(s.image);
    cm.record(s.label, r.predicted_class());
  }
  return compute_metrics(cm);
}

KfoldSummary kfold_run(const DataSet& all, const RunConfig& config, std::size_t k,
                       std::size_t epochs_per_fold) {
  std::vector<std::size_t> class_ids;
  class_ids.reserve(all.samples.size());
  for (const auto& s : all.samples) class_ids.push_back(s.label);
  const std::vector<std::size_t> folds = kfold_assign(class_ids, all.group_ids, k, config.seed);

  std::vector<double> accuracies;
  for (std::size_t fold = 0; fold < k; ++fold) {
    DataSet train_set, val_set;
    train_set.num_classes = val_set.num_classes = all.num_classes;
    for (std::size_t i = 0; i < all.samples.size(); ++i) {
      if (folds[i] == fold) {
        val_set.samples.push_back(all.samples[i]);
        val_set.group_ids.push_back(all.group_ids[i]);
      } else {
        train_set.samples.push_back(all.samples[i]);
        train_set.group_ids.push_back(all.group_ids[i]);
      }
    }
    RunConfig fold_config = config;
    fold_config.epochs = epochs_per_fold;
    PimModel model(config.model, config.seed + 1000 + fold);
    train_model(model, train_set, val_set, fold_config);
    // final-epoch weights evaluate the held-out fold
    accuracies.push_back(evaluate_model(model, val_set).accuracy);
  }
  return summarize_folds(accuracies);
}

std::string AblationRow::to_json() const {
  json j;
  j["variant"] = variant;
  if (test1_accuracy) j["test1_accuracy"] = *test1_accuracy;
  else j["test1_accuracy"] = nullptr;
  if (test2_accuracy) j["test2_accuracy"] = *test2_accuracy;
  else j["test2_accuracy"] = nullptr;
  j["error"] = error;
  return j.dump();
}

std::vector<AblationRow> ablate(const RunConfig& base, AblationAxis axis,
                                const std::vector<std::vector<std::size_t>>& values,
                                const DataSet& train, const DataSet& val,
                                const DataSet* test1, const DataSet* test2) {
  std::vector<AblationRow> rows;
  for (const auto& value : values) {
    AblationRow row;
    RunConfig config = base;
    try {
      if (axis == AblationAxis::FpnSize) {
        if (value.size() != 1) throw ConfigError("fpn_size variant needs one value");
        config.model.fpn.fpn_size = value[0];
        row.variant = std::to_string(value[0]);
      } else {
        if (value.size() != kNumBlocks) throw ConfigError("n_sel variant needs four values");
        std::copy(value.begin(), value.end(), config.model.selection.n_sel.begin());
        std::ostringstream os;
        os << "(" << value[0] << "," << value[1] << "," << value[2] << "," << value[3] << ")";
        row.variant = os.str();
      }
      config.validate();
      PimModel model(config.model, config.seed);
      train_model(model, train, val, config);
      if (test1) row.test1_accuracy = evaluate_model(model, *test1).accuracy;
      if (test2) row.test2_accuracy = evaluate_model(model, *test2).accuracy;
    } catch (const std::exception& e) {
      row.error = e.what();
      if (row.variant.empty()) row.variant = "(invalid)";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string fmt_acc(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << (*v * 100.0) << "%";
  return os.str();
}

} // namespace

std::string render_ablation_table(const std::string& axis_name, const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << axis_name << " | test1 | test2\n";
  os << "---\n";
  for (const auto& r : rows) {
    os << r.variant << " | " << fmt_acc(r.test1_accuracy) << " | " << fmt_acc(r.test2_accuracy);
    if (!r.error.empty()) os << " | failed: " << r.error;
    os << "\n";
  }
  return os.str();
}

std::vector<LadderRow> ladder_rows() {
  // reference accuracies from the full-scale wrist experiments
  return {
      {"no augmentation", std::nullopt, std::nullopt, 0.4093, 0.4375},
      {"with augmentation", std::nullopt, std::nullopt, 0.8438, 0.8250},
      {"+ sign-momentum optimizer", std::nullopt, std::nullopt, 0.8544, 0.8375},
      {"+ fpn 1024", std::nullopt, std::nullopt, 0.8570, 0.8125},
  };
}

std::string render_ladder(const std::vector<LadderRow>& rows) {
  std::ostringstream os;
  os << "configuration | test1 | test2 | ref test1 | ref test2\n";
  os << "---\n";
  for (const auto& r : rows) {
    os << r.name << " | " << fmt_acc(r.test1_accuracy) << " | " << fmt_acc(r.test2_accuracy) << " | "
       << fmt_acc(r.reference_test1) << " | " << fmt_acc(r.reference_test2) << "\n";
  }
  return os.str();
}

Heatmap compute_cam(const PimModel& model, const Tensor& image, std::size_t class_index,
                    const CamRequest& request, ForwardResult* result_out) {
  if (request.layer >= kNumBlocks) throw ConfigError("cam layer out of range");
  if (class_index >= model.config().num_classes) throw ConfigError("cam class out of range");
  Tape tape;
  ForwardResult result = model.forward(image);
  Tensor score = gather_rows(reshape(result.combiner_scores, {model.config().num_classes, 1}),
                             {class_index});
  tape.backward(sum_all(score));
  const Tensor& map4 = request.use_fpn_maps ? result.fpn_maps.maps[request.layer]
                                            : result.raw_maps.maps[request.layer];
  const std::size_t c = map4.extent(1), h = map4.extent(2), w = map4.extent(3);
  Tensor activations = Tensor::from_data({c, h, w}, map4.data());
  if (!map4.has_grad()) throw NumericError("activation gradient missing");
  std::vector<double> weights = channel_weights(activations, map4.grad());
  std::vector<double> raw = combine(activations, weights);
  const std::size_t target_h = image.extent(image.rank() - 2);
  const std::size_t target_w = image.extent(image.rank() - 1);
  if (result_out) *result_out = result;
  return normalize_upsample(raw, h, w, target_h, target_w);
}

ExplainOutput explain_sample(const PimModel& model, const Sample& sample,
                             std::optional<std::size_t> class_index,
                             const CamRequest& request, const std::string& out_dir) {
  fs::create_directories(out_dir);
  ForwardResult result;
  std::size_t cls = class_index.value_or(0);
  if (!class_index) {
    // default: the predicted class
    cls = model.forward(sample.image).predicted_class();
  }
  CamRequest req = request;
  req.class_index = cls;
  Heatmap heat = compute_cam(model, sample.image, cls, req, &result);

  const std::size_t r = sample.image.extent(sample.image.rank() - 1);
  std::vector<double> pixels = sample.image.data();
  // whitened inputs are not display-ready; rescale into [0,1] for the overlay
  double lo = pixels[0], hi = pixels[0];
  for (double v : pixels) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > lo) {
    for (double& v : pixels) v = (v - lo) / (hi - lo);
  }
  GrayImage base = from_unit_floats(r, r, pixels);
  RgbImage blended = overlay(base, heat);

  const std::string stem = sample.id + "_" + std::to_string(cls) + "_" + std::to_string(req.layer);
  ExplainOutput out;
  out.class_index = cls;
  out.layer = req.layer;
  out.png_path = (fs::path(out_dir) / (stem + ".png")).string();
  write_png_rgb(out.png_path, blended);

  // selection dump cross-referenced by the sidecar
  const std::string dump_name = sample.id + "_selection.txt";
  {
    std::ofstream dump(fs::path(out_dir) / dump_name);
    for (std::size_t b = 0; b < kNumBlocks; ++b) {
      dump << selection_dump(b + 1, result.selected[b]);
    }
  }

  json sidecar;
  sidecar["image"] = sample.id;
  sidecar["class_index"] = cls;
  sidecar["layer"] = req.layer;
  sidecar["use_fpn_maps"] = req.use_fpn_maps;
  sidecar["scores"] = result.combiner_scores.data();
  sidecar["selection_dump"] = dump_name;
  out.sidecar_path = (fs::path(out_dir) / (stem + ".json")).string();
  std::ofstream side(out.sidecar_path);
  side << sidecar.dump(2) << "\n";
  return out;
}

} // namespace pim
