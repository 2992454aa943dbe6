#include "pim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pim/rng.hpp"

namespace pim {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : n_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw std::invalid_argument("confusion matrix needs at least one class");
}

ConfusionMatrix ConfusionMatrix::from_pairs(std::size_t num_classes,
                                            const std::vector<std::size_t>& truth,
                                            const std::vector<std::size_t>& predicted) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("truth/prediction length mismatch");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.record(truth[i], predicted[i]);
  return cm;
}

std::size_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
  if (truth >= n_ || predicted >= n_) throw std::out_of_range("confusion matrix index");
  return counts_[truth * n_ + predicted];
}

void ConfusionMatrix::record(std::size_t truth, std::size_t predicted) {
  if (truth >= n_ || predicted >= n_) throw std::out_of_range("confusion matrix index");
  ++counts_[truth * n_ + predicted];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (std::size_t c : counts_) t += c;
  return t;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) os << (j ? "," : "") << counts_[i * n_ + j];
    os << "\n";
  }
  return os.str();
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> macro(const std::vector<std::optional<double>>& values) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      acc += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return acc / static_cast<double>(n);
}

void print_opt(std::ostringstream& os, const std::optional<double>& v) {
  if (v) os << *v;
  else os << "null";
}

} // namespace

MetricsReport compute_metrics(const ConfusionMatrix& confusion) {
  const std::size_t n = confusion.num_classes();
  const std::size_t total = confusion.total();
  MetricsReport report;
  report.confusion = confusion;

  std::size_t trace = 0;
  for (std::size_t i = 0; i < n; ++i) trace += confusion.at(i, i);
  report.accuracy = total == 0 ? 0.0 : static_cast<double>(trace) / static_cast<double>(total);

  std::vector<std::optional<double>> sens, spec, prec, f1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t tp = confusion.at(c, c), fn = 0, fp = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != c) {
        fn += confusion.at(c, j);
        fp += confusion.at(j, c);
      }
    }
    const std::size_t tn = total - tp - fn - fp;
    ClassMetrics m;
    m.sensitivity = ratio(tp, tp + fn);
    m.specificity = ratio(tn, tn + fp);
    m.precision = ratio(tp, tp + fp);
    if (m.sensitivity && m.precision && (*m.sensitivity + *m.precision) > 0.0) {
      m.f1 = 2.0 * (*m.sensitivity) * (*m.precision) / (*m.sensitivity + *m.precision);
    }
    sens.push_back(m.sensitivity);
    spec.push_back(m.specificity);
    prec.push_back(m.precision);
    f1.push_back(m.f1);
    report.per_class.push_back(m);
  }
  report.macro_sensitivity = macro(sens);
  report.macro_specificity = macro(spec);
  report.macro_precision = macro(prec);
  report.macro_f1 = macro(f1);
  return report;
}

std::string MetricsReport::to_json() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\"accuracy\":" << accuracy << ",\"per_class\":[";
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const auto& m = per_class[c];
    os << (c ? "," : "") << "{\"sensitivity\":";
    print_opt(os, m.sensitivity);
    os << ",\"specificity\":";
    print_opt(os, m.specificity);
    os << ",\"precision\":";
    print_opt(os, m.precision);
    os << ",\"f1\":";
    print_opt(os, m.f1);
    os << "}";
  }
  os << "],\"macro\":{\"sensitivity\":";
  print_opt(os, macro_sensitivity);
  os << ",\"specificity\":";
  print_opt(os, macro_specificity);
  os << ",\"precision\":";
  print_opt(os, macro_precision);
  os << ",\"f1\":";
  print_opt(os, macro_f1);
  os << "},\"confusion\":[";
  for (std::size_t i = 0; i < confusion.num_classes(); ++i) {
    os << (i ? "," : "") << "[";
    for (std::size_t j = 0; j < confusion.num_classes(); ++j) {
      os << (j ? "," : "") << confusion.at(i, j);
    }
    os << "]";
  }
  os << "]}";
  return os.str();
}

std::vector<std::size_t> kfold_assign(const std::vector<std::size_t>& class_ids,
                                      const std::vector<std::string>& group_ids, std::size_t k,
                                      std::uint64_t seed) {
  if (class_ids.size() != group_ids.size()) {
    throw std::invalid_argument("class/group length mismatch");
  }
  if (k == 0 || k > class_ids.size()) {
    throw std::invalid_argument("k must be in [1, record count]");
  }

  // group records into families; a family carries one class
  struct Family {
    std::size_t class_id;
    std::vector<std::size_t> members;
  };
  std::map<std::string, Family> families;
  for (std::size_t i = 0; i < class_ids.size(); ++i) {
    auto [it, inserted] = families.try_emplace(group_ids[i], Family{class_ids[i], {}});
    if (!inserted && it->second.class_id != class_ids[i]) {
      throw std::invalid_argument("group '" + group_ids[i] + "' spans multiple classes");
    }
    it->second.members.push_back(i);
  }

  // stratify per class: shuffle families, then greedily fill the currently
  // smallest fold (by member count within the class)
  std::map<std::size_t, std::vector<const Family*>> by_class;
  for (const auto& [gid, fam] : families) by_class[fam.class_id].push_back(&fam);

  std::vector<std::size_t> fold_of(class_ids.size(), 0);
  for (auto& [cls, fams] : by_class) {
    if (fams.size() < k) {
      throw std::invalid_argument("class " + std::to_string(cls) + " has fewer groups (" +
                                  std::to_string(fams.size()) + ") than folds (" + std::to_string(k) + ")");
    }
    Rng rng = Rng::derive(seed, /*tag=*/0xf01d, cls);
    for (std::size_t i = fams.size(); i > 1; --i) {
      std::swap(fams[i - 1], fams[rng.below(i)]);
    }
    // large families first so the greedy fill stays balanced
    std::stable_sort(fams.begin(), fams.end(), [](const Family* a, const Family* b) {
      return a->members.size() > b->members.size();
    });
    std::vector<std::size_t> fold_sizes(k, 0);
    for (const Family* fam : fams) {
      std::size_t best = 0;
      for (std::size_t f = 1; f < k; ++f) {
        if (fold_sizes[f] < fold_sizes[best]) best = f;
      }
      fold_sizes[best] += fam->members.size();
      for (std::size_t idx : fam->members) fold_of[idx] = best;
    }
  }
  return fold_of;
}

KfoldSummary summarize_folds(const std::vector<double>& fold_accuracies) {
  if (fold_accuracies.empty()) throw std::invalid_argument("no folds to summarize");
  KfoldSummary s;
  s.fold_accuracies = fold_accuracies;
  for (double a : fold_accuracies) s.mean += a;
  s.mean /= static_cast<double>(fold_accuracies.size());
  double var = 0.0;
  for (double a : fold_accuracies) var += (a - s.mean) * (a - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(fold_accuracies.size()));
  return s;
}

std::string KfoldSummary::to_json() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\"folds\":[";
  for (std::size_t i = 0; i < fold_accuracies.size(); ++i) {
    os << (i ? "," : "") << fold_accuracies[i];
  }
  os << "],\"mean\":" << mean << ",\"stddev\":" << stddev << "}";
  return os.str();
}

} // namespace pim
