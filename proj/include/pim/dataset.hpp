#ifndef PIM_DATASET_HPP
#define PIM_DATASET_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pim/checkpoint.hpp"

namespace pim {

enum class Projection { posteroanterior, lateral, unknown };

// One row of the annotation table.
struct RawRecord {
  std::string image_id;
  std::string image_path; // relative to the image root
  std::set<std::string> objects;
  Projection projection = Projection::unknown;
};

// Annotation table: comma-separated "image_id,relative_path,objects,projection"
// with objects semicolon-joined. Lines starting with '#' are skipped.
std::vector<RawRecord> load_annotations(const std::string& path);

struct AugmentationParams {
  double rotation_range = 15.0; // degrees, sampled symmetric
  double width_shift = 0.2;     // fraction of width
  double height_shift = 0.1;    // fraction of height
  bool horizontal_flip = true;
  double shear = 0.2; // degrees, sampled symmetric
  double brightness_lo = 0.7;
  double brightness_hi = 1.3;
  double zoom = 0.1; // factor sampled in [1-zoom, 1+zoom]
  // out-of-frame pixels are constant-filled with 0
  bool zca_whitening = true;
  double zca_epsilon = 1e-5;
};

struct CurationConfig {
  std::set<std::string> excluded_classes{"foreignbody"};
  std::size_t min_class_count = 50;
  std::size_t fracture_target = 500; // training-pool downsample
  std::map<std::string, std::size_t> per_class_target; // post-augmentation train targets
  std::string downsampled_class = "fracture";
  std::size_t test1_per_class = 120; // augmented test set target
  std::size_t test2_downsampled = 25; // original test set cap for the downsampled class
  double test_fraction = 0.2;  // per-class carve for the test pool
  double split_fraction = 0.8; // train share of the augmented set
  enum class TestMode { augmented, original, both };
  TestMode test_mode = TestMode::both;
  bool leakage_safe = true;
  std::size_t resolution = 64; // images resized here before augmentation
  std::uint64_t seed = 0;
};

// Table presets: per-class post-augmentation targets and the matching
// training-pool downsample for the four published set sizes.
CurationConfig preset_config(const std::string& name); // A1|A2|A3|A4

struct ClassifiedRecord {
  RawRecord raw;
  std::string class_name;
};

// Keep records whose object set, ignoring the hand-side "text" marker, is a
// single non-excluded class. Aborts (throws) when nothing survives, with the
// per-class counts in the message.
std::vector<ClassifiedRecord> extract_single_class(const std::vector<RawRecord>& raw,
                                                   const CurationConfig& config,
                                                   std::map<std::string, std::size_t>* counts = nullptr);

// Drop classes below min_class_count.
std::vector<ClassifiedRecord> filter_classes(const std::vector<ClassifiedRecord>& records,
                                             std::size_t min_class_count,
                                             std::vector<std::string>* dropped = nullptr);

// Seeded uniform subsample of one class down to target (other classes pass
// through). Throws when target exceeds the available count.
std::vector<ClassifiedRecord> downsample_class(const std::vector<ClassifiedRecord>& records,
                                               const std::string& class_name, std::size_t target,
                                               std::uint64_t seed);

// Both steps with the config's values, the published-pipeline shape.
std::vector<ClassifiedRecord> filter_and_downsample(const std::vector<ClassifiedRecord>& records,
                                                    const CurationConfig& config);

struct ManifestRecord {
  std::string image_id;
  std::string image_path;
  std::string class_name;
  std::string split;         // train|val|test1|test2
  std::string parent_id;     // empty for originals
  std::string transform_log; // JSON object, empty for originals
};

struct Manifest {
  std::vector<ManifestRecord> records;
  std::vector<std::string> class_names; // sorted; index is the label
  bool zca = false;
  std::string zca_path;

  std::size_t label_of(const std::string& class_name) const;
  std::vector<const ManifestRecord*> split_records(const std::string& split) const;
  std::string to_jsonl() const;
  static Manifest from_jsonl_file(const std::string& path);
  void save(const std::string& path) const;
};

// Sampled affine + photometric transform, pinned so a transform_log entry
// fully reproduces the output buffer.
struct SampledTransform {
  double rotation_deg = 0.0;
  double shift_x = 0.0; // pixels
  double shift_y = 0.0;
  double shear_deg = 0.0;
  double zoom = 1.0;
  double brightness = 1.0;
  bool flip = false;

  std::string to_json() const;
};

SampledTransform sample_transform(const AugmentationParams& params, std::uint64_t seed,
                                  std::uint64_t index, std::size_t height, std::size_t width);

// Apply to a [0,1] grayscale buffer; inverse-mapped bilinear sampling with
// constant zero fill.
std::vector<double> apply_transform(const std::vector<double>& pixels, std::size_t height,
                                    std::size_t width, const SampledTransform& t);

// ZCA whitening fitted on a stack of flattened images (rows). W maps
// mean-centered rows to the whitened space.
struct ZcaWhitener {
  std::vector<double> mean;   // [d]
  std::vector<double> matrix; // [d,d] row-major
  std::size_t dim = 0;

  static ZcaWhitener fit(const std::vector<std::vector<double>>& images, double epsilon);
  std::vector<double> apply(const std::vector<double>& image) const;
  void save(ArrayStore& store) const;
  static ZcaWhitener from_store(const ArrayStore& store);
};

// Pixel access used by curation; lets tests run fully in memory.
class ImageSource {
public:
  virtual ~ImageSource() = default;
  // returns a [0,1] grayscale buffer of the given resolution
  virtual std::vector<double> load(const std::string& path, std::size_t resolution) = 0;
};

// Reads 8-bit grayscale PNGs under a root directory, bilinearly resized.
class DirectoryImageSource : public ImageSource {
public:
  explicit DirectoryImageSource(std::string root) : root_(std::move(root)) {}
  std::vector<double> load(const std::string& path, std::size_t resolution) override;

private:
  std::string root_;
};

struct CurationResult {
  Manifest manifest;
  std::map<std::string, std::size_t> extracted_counts;
  std::vector<std::string> log; // step-by-step counts and warnings
};

// Full pipeline: extract -> filter -> test carve -> downsample -> augment to
// balance -> train/val split -> optional ZCA fit on train. Augmented images
// are written as PNGs under out_dir/aug/<class>/; the manifest and whitening
// matrix land in out_dir.
CurationResult curate(const std::vector<RawRecord>& raw, const CurationConfig& config,
                      const AugmentationParams& params, ImageSource& images,
                      const std::string& out_dir);

} // namespace pim

#endif
