#ifndef PIM_METRICS_HPP
#define PIM_METRICS_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace pim {

// Rows are true classes, columns predicted.
class ConfusionMatrix {
public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t num_classes);
  static ConfusionMatrix from_pairs(std::size_t num_classes,
                                    const std::vector<std::size_t>& truth,
                                    const std::vector<std::size_t>& predicted);

  std::size_t num_classes() const { return n_; }
  std::size_t at(std::size_t truth, std::size_t predicted) const;
  void record(std::size_t truth, std::size_t predicted);
  std::size_t total() const;

  std::string to_csv() const; // flat comma-separated rows

private:
  std::size_t n_ = 0;
  std::vector<std::size_t> counts_;
};

// One-vs-rest metrics. Zero-denominator cases report nullopt and are skipped
// by the macro averages.
struct ClassMetrics {
  std::optional<double> sensitivity; // TP/(TP+FN)
  std::optional<double> specificity; // TN/(TN+FP)
  std::optional<double> precision;   // TP/(TP+FP)
  std::optional<double> f1;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  std::optional<double> macro_sensitivity;
  std::optional<double> macro_specificity;
  std::optional<double> macro_precision;
  std::optional<double> macro_f1;
  ConfusionMatrix confusion;

  std::string to_json() const;
};

MetricsReport compute_metrics(const ConfusionMatrix& confusion);

// Stratified K-fold assignment. Entries sharing a group id stay together
// (augmentation families); singleton groups give per-class fold sizes within
// one of each other. Returns a fold id per record.
std::vector<std::size_t> kfold_assign(const std::vector<std::size_t>& class_ids,
                                      const std::vector<std::string>& group_ids, std::size_t k,
                                      std::uint64_t seed);

struct KfoldSummary {
  std::vector<double> fold_accuracies;
  double mean = 0.0;
  double stddev = 0.0; // population (divide by K)

  std::string to_json() const;
};

KfoldSummary summarize_folds(const std::vector<double>& fold_accuracies);

} // namespace pim

#endif
