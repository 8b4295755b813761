#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace disclstm {

/// d x d counts, rows = gold class, columns = predicted class. Merging is
/// a commutative sum, so partial matrices from parallel workers combine in
/// any order.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes = 0)
      : d_(num_classes), counts_(num_classes * num_classes, 0) {}

  void add(std::size_t gold, std::size_t predicted);
  void add(std::span<const std::size_t> golds, std::span<const std::size_t> predictions);
  void merge(const ConfusionMatrix& other);

  std::size_t num_classes() const noexcept { return d_; }
  std::size_t at(std::size_t gold, std::size_t predicted) const { return counts_[gold * d_ + predicted]; }
  std::size_t total() const noexcept;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t d_;
  std::vector<std::size_t> counts_;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MetricsReport {
  std::size_t total = 0;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix confusion;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Per-class precision, recall and F1 (each 0 when its denominator is 0)
/// and their support-weighted mean.
MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion);

/// Throws UsageError on length mismatch, empty input, or labels >= d.
MetricsReport weighted_f1(std::span<const std::size_t> predictions,
                          std::span<const std::size_t> golds, std::size_t num_classes);

/// Compact JSON object.
std::string report_to_json(const MetricsReport& report, const std::vector<std::string>& label_names);
/// Aligned per-class table followed by the confusion matrix.
std::string format_report(const MetricsReport& report, const std::vector<std::string>& label_names);

}  // namespace disclstm
