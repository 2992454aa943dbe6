#include "pim/dataset.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "pim/image.hpp"
#include "pim/rng.hpp"

namespace pim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

Projection parse_projection(const std::string& s) {
  if (s == "posteroanterior" || s == "pa") return Projection::posteroanterior;
  if (s == "lateral") return Projection::lateral;
  return Projection::unknown;
}

std::string counts_table(const std::map<std::string, std::size_t>& counts) {
  std::ostringstream os;
  for (const auto& [cls, n] : counts) os << cls << "=" << n << " ";
  return os.str();
}

// deterministic seeded shuffle
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

// stable across builds, unlike std::hash
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace

std::vector<RawRecord> load_annotations(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open annotation table '" + path + "'");
  std::vector<RawRecord> records;
  std::string line;
  while (std::getline(f, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string id, rel, objects, projection;
    if (!std::getline(is, id, ',') || !std::getline(is, rel, ',') || !std::getline(is, objects, ',')) {
      throw std::runtime_error("malformed annotation line: " + line);
    }
    std::getline(is, projection, ',');
    RawRecord r;
    r.image_id = trim(id);
    r.image_path = trim(rel);
    std::istringstream objs(objects);
    std::string obj;
    while (std::getline(objs, obj, ';')) {
      obj = trim(obj);
      if (!obj.empty()) r.objects.insert(obj);
    }
    if (r.objects.empty()) throw std::runtime_error("record '" + r.image_id + "' has no objects");
    r.projection = parse_projection(trim(projection));
    records.push_back(std::move(r));
  }
  return records;
}

CurationConfig preset_config(const std::string& name) {
  CurationConfig c;
  if (name == "A1") {
    c.per_class_target = {{"boneanomaly", 1050}, {"fracture", 1100}, {"metal", 1054}, {"softtissue", 1034}};
    c.fracture_target = 1100;
  } else if (name == "A2") {
    c.per_class_target = {{"boneanomaly", 490}, {"fracture", 500}, {"metal", 496}, {"softtissue", 470}};
    c.fracture_target = 500;
  } else if (name == "A3") {
    c.per_class_target = {{"boneanomaly", 280}, {"fracture", 300}, {"metal", 310}, {"softtissue", 282}};
    c.fracture_target = 300;
  } else if (name == "A4") {
    c.per_class_target = {{"boneanomaly", 210}, {"fracture", 200}, {"metal", 186}, {"softtissue", 188}};
    c.fracture_target = 200;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "' (expected A1..A4)");
  }
  return c;
}

std::vector<ClassifiedRecord> extract_single_class(const std::vector<RawRecord>& raw,
                                                   const CurationConfig& config,
                                                   std::map<std::string, std::size_t>* counts) {
  if (raw.empty()) throw std::invalid_argument("no raw records to extract from");
  std::vector<ClassifiedRecord> out;
  std::map<std::string, std::size_t> local;
  for (const RawRecord& r : raw) {
    std::set<std::string> objects = r.objects;
    objects.erase("text"); // hand-side marker, not a pathology
    if (objects.size() != 1) continue;
    const std::string& cls = *objects.begin();
    if (config.excluded_classes.count(cls)) continue;
    out.push_back({r, cls});
    ++local[cls];
  }
  if (counts) *counts = local;
  if (out.empty()) {
    throw std::runtime_error("single-class extraction left nothing; per-class counts: " + counts_table(local));
  }
  return out;
}

std::vector<ClassifiedRecord> filter_classes(const std::vector<ClassifiedRecord>& records,
                                             std::size_t min_class_count,
                                             std::vector<std::string>* dropped) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) ++counts[r.class_name];
  std::set<std::string> keep;
  for (const auto& [cls, n] : counts) {
    if (n >= min_class_count) keep.insert(cls);
    else if (dropped) dropped->push_back(cls);
  }
  std::vector<ClassifiedRecord> out;
  for (const auto& r : records) {
    if (keep.count(r.class_name)) out.push_back(r);
  }
  return out;
}

std::vector<ClassifiedRecord> downsample_class(const std::vector<ClassifiedRecord>& records,
                                               const std::string& class_name, std::size_t target,
                                               std::uint64_t seed) {
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].class_name == class_name) members.push_back(i);
  }
  if (members.size() < target) {
    throw std::invalid_argument("downsample target " + std::to_string(target) + " exceeds available " +
                                std::to_string(members.size()) + " for class '" + class_name + "'");
  }
  Rng rng = Rng::derive(seed, /*tag=*/0xd0c5);
  shuffle(members, rng);
  members.resize(target);
  std::set<std::size_t> chosen(members.begin(), members.end());
  std::vector<ClassifiedRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].class_name != class_name || chosen.count(i)) out.push_back(records[i]);
  }
  return out;
}

std::vector<ClassifiedRecord> filter_and_downsample(const std::vector<ClassifiedRecord>& records,
                                                    const CurationConfig& config) {
  std::vector<ClassifiedRecord> filtered = filter_classes(records, config.min_class_count, nullptr);
  bool has_target_class = false;
  for (const auto& r : filtered) has_target_class = has_target_class || r.class_name == config.downsampled_class;
  if (!has_target_class) return filtered;
  return downsample_class(filtered, config.downsampled_class, config.fracture_target, config.seed);
}

std::size_t Manifest::label_of(const std::string& class_name) const {
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    if (class_names[i] == class_name) return i;
  }
  throw std::out_of_range("class '" + class_name + "' not in manifest");
}

std::vector<const ManifestRecord*> Manifest::split_records(const std::string& split) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(&r);
  }
  return out;
}

std::string Manifest::to_jsonl() const {
  std::ostringstream os;
  {
    json header;
    header["classes"] = class_names;
    header["zca"] = zca;
    header["zca_path"] = zca_path;
    os << header.dump() << "\n";
  }
  for (const auto& r : records) {
    json j;
    j["id"] = r.image_id;
    j["path"] = r.image_path;
    j["class"] = r.class_name;
    j["split"] = r.split;
    if (r.parent_id.empty()) j["parent"] = nullptr;
    else j["parent"] = r.parent_id;
    if (r.transform_log.empty()) j["transform"] = nullptr;
    else j["transform"] = json::parse(r.transform_log);
    os << j.dump() << "\n";
  }
  return os.str();
}

Manifest Manifest::from_jsonl_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest '" + path + "'");
  Manifest m;
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("manifest '" + path + "' is empty");
  {
    json header = json::parse(line);
    m.class_names = header.at("classes").get<std::vector<std::string>>();
    m.zca = header.value("zca", false);
    m.zca_path = header.value("zca_path", "");
  }
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line);
    ManifestRecord r;
    r.image_id = j.at("id").get<std::string>();
    r.image_path = j.at("path").get<std::string>();
    r.class_name = j.at("class").get<std::string>();
    r.split = j.at("split").get<std::string>();
    if (!j.at("parent").is_null()) r.parent_id = j.at("parent").get<std::string>();
    if (!j.at("transform").is_null()) r.transform_log = j.at("transform").dump();
    m.records.push_back(std::move(r));
  }
  return m;
}

void Manifest::save(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write manifest '" + path + "'");
  f << to_jsonl();
}

std::string SampledTransform::to_json() const {
  json j;
  j["rotation_deg"] = rotation_deg;
  j["shift_x"] = shift_x;
  j["shift_y"] = shift_y;
  j["shear_deg"] = shear_deg;
  j["zoom"] = zoom;
  j["brightness"] = brightness;
  j["flip"] = flip;
  j["order"] = "affine,brightness,zca-at-load";
  return j.dump();
}

SampledTransform sample_transform(const AugmentationParams& params, std::uint64_t seed,
                                  std::uint64_t index, std::size_t height, std::size_t width) {
  Rng rng = Rng::derive(seed, /*tag=*/0xa462, index);
  SampledTransform t;
  t.rotation_deg = rng.uniform(-params.rotation_range, params.rotation_range);
  t.shift_x = rng.uniform(-params.width_shift, params.width_shift) * static_cast<double>(width);
  t.shift_y = rng.uniform(-params.height_shift, params.height_shift) * static_cast<double>(height);
  t.shear_deg = rng.uniform(-params.shear, params.shear);
  t.zoom = rng.uniform(1.0 - params.zoom, 1.0 + params.zoom);
  t.brightness = rng.uniform(params.brightness_lo, params.brightness_hi);
  t.flip = params.horizontal_flip && rng.coin();
  return t;
}

std::vector<double> apply_transform(const std::vector<double>& pixels, std::size_t height,
                                    std::size_t width, const SampledTransform& t) {
  if (pixels.size() != height * width) throw std::invalid_argument("pixel buffer does not match extents");
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double theta = t.rotation_deg * M_PI / 180.0;
  const double shear = t.shear_deg * M_PI / 180.0;

  // forward map: translate(-c) -> flip -> zoom -> shear -> rotate ->
  // translate(c + shift). Output pixels sample the inverse.
  const double ct = std::cos(theta), st = std::sin(theta);
  // rotate * shear * zoom * flip, applied to column vector (x, y)
  const double fx = t.flip ? -1.0 : 1.0;
  // shear matrix: [[1, -sin(s)], [0, cos(s)]]
  const double a11 = ct * 1.0, a12 = ct * (-std::sin(shear)) - st * std::cos(shear);
  const double a21 = st * 1.0, a22 = st * (-std::sin(shear)) + ct * std::cos(shear);
  const double m11 = a11 * t.zoom * fx, m12 = a12 * t.zoom;
  const double m21 = a21 * t.zoom * fx, m22 = a22 * t.zoom;
  const double det = m11 * m22 - m12 * m21;
  if (std::fabs(det) < 1e-12) throw std::runtime_error("degenerate augmentation transform");
  const double i11 = m22 / det, i12 = -m12 / det;
  const double i21 = -m21 / det, i22 = m11 / det;

  std::vector<double> out(pixels.size(), 0.0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) - cx - t.shift_x;
      const double dy = static_cast<double>(y) - cy - t.shift_y;
      const double sx = i11 * dx + i12 * dy + cx;
      const double sy = i21 * dx + i22 * dy + cy;
      if (sx < 0.0 || sy < 0.0 || sx > static_cast<double>(width - 1) ||
          sy > static_cast<double>(height - 1)) {
        continue; // constant fill 0
      }
      const std::size_t x0 = static_cast<std::size_t>(sx);
      const std::size_t y0 = static_cast<std::size_t>(sy);
      const std::size_t x1 = std::min(x0 + 1, width - 1);
      const std::size_t y1 = std::min(y0 + 1, height - 1);
      const double wx = sx - static_cast<double>(x0);
      const double wy = sy - static_cast<double>(y0);
      const double top = pixels[y0 * width + x0] * (1 - wx) + pixels[y0 * width + x1] * wx;
      const double bot = pixels[y1 * width + x0] * (1 - wx) + pixels[y1 * width + x1] * wx;
      double v = (top * (1 - wy) + bot * wy) * t.brightness;
      out[y * width + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

ZcaWhitener ZcaWhitener::fit(const std::vector<std::vector<double>>& images, double epsilon) {
  if (images.size() < 2) throw std::invalid_argument("zca needs at least two images");
  const std::size_t d = images[0].size();
  for (const auto& img : images) {
    if (img.size() != d) throw std::invalid_argument("zca images must share a flattened dimension");
  }
  const std::size_t n = images.size();
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = images[i][j];
  }
  Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  if (x.cwiseAbs().maxCoeff() < 1e-12) {
    throw std::invalid_argument("zca rejected: all images identical (degenerate covariance)");
  }
  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("zca eigendecomposition failed");
  Eigen::VectorXd s = eig.eigenvalues().cwiseMax(0.0);
  Eigen::VectorXd inv_sqrt = (s.array() + epsilon).rsqrt();
  Eigen::MatrixXd w = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();

  ZcaWhitener z;
  z.dim = d;
  z.mean.assign(mean.data(), mean.data() + d);
  z.matrix.resize(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) z.matrix[i * d + j] = w(i, j);
  }
  return z;
}

std::vector<double> ZcaWhitener::apply(const std::vector<double>& image) const {
  if (image.size() != dim) throw std::invalid_argument("zca dimension mismatch");
  std::vector<double> centered(dim);
  for (std::size_t i = 0; i < dim; ++i) centered[i] = image[i] - mean[i];
  std::vector<double> out(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    const double* row = matrix.data() + i * dim;
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) acc += row[j] * centered[j];
    out[i] = acc;
  }
  return out;
}

void ZcaWhitener::save(ArrayStore& store) const {
  store.put("zca.mean", {dim}, mean);
  store.put("zca.matrix", {dim, dim}, matrix);
}

ZcaWhitener ZcaWhitener::from_store(const ArrayStore& store) {
  ZcaWhitener z;
  z.mean = store.data("zca.mean");
  z.dim = z.mean.size();
  z.matrix = store.data("zca.matrix");
  if (z.matrix.size() != z.dim * z.dim) throw std::runtime_error("zca matrix shape mismatch");
  return z;
}

std::vector<double> DirectoryImageSource::load(const std::string& path, std::size_t resolution) {
  const fs::path full = fs::path(root_) / path;
  GrayImage img = read_png_gray(full.string());
  std::vector<double> pixels = to_unit_floats(img);
  if (img.height == resolution && img.width == resolution) return pixels;
  return resize_bilinear(pixels, img.height, img.width, resolution, resolution);
}

namespace {

struct WorkingSet {
  // indices into a shared pool of ClassifiedRecord
  std::map<std::string, std::vector<std::size_t>> by_class;
};

std::map<std::string, std::vector<std::size_t>> group_by_class(const std::vector<ClassifiedRecord>& records) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < records.size(); ++i) out[records[i].class_name].push_back(i);
  return out;
}

} // namespace

CurationResult curate(const std::vector<RawRecord>& raw, const CurationConfig& config,
                      const AugmentationParams& params, ImageSource& images,
                      const std::string& out_dir) {
  if (!(config.split_fraction > 0.0 && config.split_fraction < 1.0)) {
    throw std::invalid_argument("split fraction must lie in (0,1)");
  }
  if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
    throw std::invalid_argument("test fraction must lie in (0,1)");
  }
  CurationResult result;
  auto& log = result.log;

  std::vector<ClassifiedRecord> singles = extract_single_class(raw, config, &result.extracted_counts);
  log.push_back("extracted singles: " + counts_table(result.extracted_counts));

  std::vector<std::string> dropped;
  std::vector<ClassifiedRecord> kept = filter_classes(singles, config.min_class_count, &dropped);
  for (const auto& cls : dropped) log.push_back("dropped class below minimum: " + cls);
  if (kept.empty()) throw std::runtime_error("class filter removed every record");

  auto by_class = group_by_class(kept);
  Manifest& manifest = result.manifest;
  for (const auto& [cls, members] : by_class) manifest.class_names.push_back(cls);
  std::sort(manifest.class_names.begin(), manifest.class_names.end());

  fs::create_directories(fs::path(out_dir) / "aug");

  const bool build_test1 = config.test_mode != CurationConfig::TestMode::original;
  const bool build_test2 = config.test_mode != CurationConfig::TestMode::augmented;

  std::map<std::string, std::vector<std::size_t>> train_pool;
  std::uint64_t aug_counter = 0; // global transform stream index

  auto emit_augmented = [&](const ClassifiedRecord& parent, const std::string& split,
                            std::size_t copy_index) {
    const SampledTransform t =
        sample_transform(params, config.seed, aug_counter, config.resolution, config.resolution);
    ++aug_counter;
    std::vector<double> pixels = images.load(parent.raw.image_path, config.resolution);
    std::vector<double> transformed = apply_transform(pixels, config.resolution, config.resolution, t);
    const std::string id = parent.raw.image_id + "_aug" + std::to_string(copy_index);
    const fs::path dir = fs::path(out_dir) / "aug" / parent.class_name;
    fs::create_directories(dir);
    const fs::path file = dir / (id + ".png");
    write_png_gray(file.string(), from_unit_floats(config.resolution, config.resolution, transformed));
    ManifestRecord r;
    r.image_id = id;
    r.image_path = fs::relative(file, out_dir).string();
    r.class_name = parent.class_name;
    r.split = split;
    r.parent_id = parent.raw.image_id;
    r.transform_log = t.to_json();
    manifest.records.push_back(std::move(r));
  };

  auto emit_original = [&](const ClassifiedRecord& rec, const std::string& split) {
    ManifestRecord r;
    r.image_id = rec.raw.image_id;
    r.image_path = rec.raw.image_path;
    r.class_name = rec.class_name;
    r.split = split;
    manifest.records.push_back(std::move(r));
  };

  // --- test carve ---------------------------------------------------------
  for (const auto& cls : manifest.class_names) {
    std::vector<std::size_t> members = by_class[cls];
    Rng rng = Rng::derive(config.seed, /*tag=*/0x7e57, fnv1a(cls));
    shuffle(members, rng);

    std::size_t carve;
    if (cls == config.downsampled_class) {
      carve = std::min(members.size(), config.test1_per_class);
    } else {
      carve = static_cast<std::size_t>(std::floor(config.test_fraction * static_cast<double>(members.size())));
    }
    if (carve == 0 && members.size() > 1) carve = 1;
    std::vector<std::size_t> test_pool(members.begin(), members.begin() + carve);
    train_pool[cls].assign(members.begin() + carve, members.end());

    // keep record order deterministic inside a split
    std::sort(test_pool.begin(), test_pool.end());

    if (build_test2) {
      std::size_t n2 = test_pool.size();
      if (cls == config.downsampled_class) n2 = std::min(n2, config.test2_downsampled);
      for (std::size_t i = 0; i < n2; ++i) emit_original(kept[test_pool[i]], "test2");
    }
    if (build_test1) {
      const std::size_t n = test_pool.size();
      if (n == 0) continue;
      if (n >= config.test1_per_class) {
        for (std::size_t i = 0; i < config.test1_per_class; ++i) emit_original(kept[test_pool[i]], "test1");
      } else {
        // originals plus augmented copies up to the closest whole multiple
        const std::size_t per_parent = config.test1_per_class / n; // >= 1
        for (std::size_t i = 0; i < n; ++i) emit_original(kept[test_pool[i]], "test1");
        for (std::size_t copy = 1; copy < per_parent; ++copy) {
          for (std::size_t i = 0; i < n; ++i) emit_augmented(kept[test_pool[i]], "test1", copy);
        }
      }
    }
    log.push_back("class " + cls + ": test pool " + std::to_string(test_pool.size()) + ", train pool " +
                  std::to_string(train_pool[cls].size()));
  }

  // --- training-pool downsample -------------------------------------------
  if (train_pool.count(config.downsampled_class)) {
    auto& members = train_pool[config.downsampled_class];
    if (members.size() > config.fracture_target) {
      Rng rng = Rng::derive(config.seed, /*tag=*/0xd0c5);
      shuffle(members, rng);
      members.resize(config.fracture_target);
      std::sort(members.begin(), members.end());
      log.push_back("downsampled " + config.downsampled_class + " training pool to " +
                    std::to_string(config.fracture_target));
    }
  }

  // --- augment to balance, then split train/val ---------------------------
  struct TrainEntry {
    std::size_t manifest_index;
    std::string family; // leakage group
  };
  std::map<std::string, std::vector<TrainEntry>> train_entries;

  for (const auto& cls : manifest.class_names) {
    auto& members = train_pool[cls];
    std::sort(members.begin(), members.end());
    std::size_t target = members.size();
    if (auto it = config.per_class_target.find(cls); it != config.per_class_target.end()) {
      target = it->second;
    }
    if (target < members.size()) {
      log.push_back("warning: class " + cls + " already exceeds target " + std::to_string(target) +
                    "; no augmentation emitted");
      target = members.size();
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
      emit_original(kept[members[i]], "train_pool");
      train_entries[cls].push_back({manifest.records.size() - 1, kept[members[i]].raw.image_id});
    }
    // round-robin over parents for maximal source diversity
    const std::size_t extra = target - members.size();
    for (std::size_t j = 0; j < extra; ++j) {
      const ClassifiedRecord& parent = kept[members[j % members.size()]];
      emit_augmented(parent, "train_pool", 1 + j / members.size());
      train_entries[cls].push_back({manifest.records.size() - 1, parent.raw.image_id});
    }
    log.push_back("class " + cls + ": balanced to " + std::to_string(target));
  }

  // per-class split: floor(split_fraction * n) train, rest val
  for (const auto& cls : manifest.class_names) {
    auto& entries = train_entries[cls];
    const std::size_t n = entries.size();
    const std::size_t train_target = static_cast<std::size_t>(
        std::floor(config.split_fraction * static_cast<double>(n)));
    Rng rng = Rng::derive(config.seed, /*tag=*/0x5f11, fnv1a(cls));

    if (!config.leakage_safe) {
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      shuffle(order, rng);
      for (std::size_t i = 0; i < n; ++i) {
        manifest.records[entries[order[i]].manifest_index].split = i < train_target ? "train" : "val";
      }
    } else {
      // families stay together; greedy fill toward the train target
      std::map<std::string, std::vector<std::size_t>> families;
      for (std::size_t i = 0; i < n; ++i) families[entries[i].family].push_back(i);
      std::vector<std::pair<std::string, std::vector<std::size_t>>> fam_list(families.begin(), families.end());
      shuffle(fam_list, rng);
      std::size_t assigned = 0;
      for (const auto& [fam, idxs] : fam_list) {
        const bool to_train = assigned + idxs.size() <= train_target;
        for (std::size_t i : idxs) {
          manifest.records[entries[i].manifest_index].split = to_train ? "train" : "val";
        }
        if (to_train) assigned += idxs.size();
      }
      // guarantee both splits are non-empty when possible
      bool has_val = false;
      for (std::size_t i = 0; i < n; ++i) {
        has_val = has_val || manifest.records[entries[i].manifest_index].split == "val";
      }
      if (!has_val && fam_list.size() > 1) {
        for (std::size_t i : fam_list.back().second) {
          manifest.records[entries[i].manifest_index].split = "val";
        }
      }
    }
  }

  // --- optional ZCA on the train split -------------------------------------
  if (params.zca_whitening) {
    std::vector<std::vector<double>> train_images;
    for (const auto& r : manifest.records) {
      if (r.split != "train") continue;
      if (r.parent_id.empty()) {
        train_images.push_back(images.load(r.image_path, config.resolution));
      } else {
        DirectoryImageSource aug_src(out_dir);
        train_images.push_back(aug_src.load(r.image_path, config.resolution));
      }
    }
    if (train_images.size() >= 2) {
      ZcaWhitener z = ZcaWhitener::fit(train_images, params.zca_epsilon);
      ArrayStore store;
      z.save(store);
      const fs::path zpath = fs::path(out_dir) / "zca.bin";
      store.save(zpath.string());
      manifest.zca = true;
      manifest.zca_path = "zca.bin";
      log.push_back("fitted whitening on " + std::to_string(train_images.size()) + " train images");
    } else {
      log.push_back("warning: too few train images for whitening; skipped");
    }
  }

  std::size_t train_n = 0, val_n = 0, t1 = 0, t2 = 0;
  for (const auto& r : manifest.records) {
    if (r.split == "train") ++train_n;
    else if (r.split == "val") ++val_n;
    else if (r.split == "test1") ++t1;
    else if (r.split == "test2") ++t2;
  }
  log.push_back("splits: train=" + std::to_string(train_n) + " val=" + std::to_string(val_n) +
                " test1=" + std::to_string(t1) + " test2=" + std::to_string(t2));
  return result;
}

} // namespace pim
