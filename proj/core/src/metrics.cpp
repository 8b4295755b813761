#include "disclstm/metrics.hpp"

#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "disclstm/error.hpp"

namespace disclstm {

void ConfusionMatrix::add(std::size_t gold, std::size_t predicted) {
  if (gold >= d_ || predicted >= d_) {
    throw UsageError("label out of range [0," + std::to_string(d_) + "): gold " +
                     std::to_string(gold) + ", predicted " + std::to_string(predicted));
  }
  ++counts_[gold * d_ + predicted];
}

void ConfusionMatrix::add(std::span<const std::size_t> golds,
                          std::span<const std::size_t> predictions) {
  if (golds.size() != predictions.size()) {
    throw UsageError("prediction/gold length mismatch: " + std::to_string(predictions.size()) +
                     " vs " + std::to_string(golds.size()));
  }
  for (std::size_t i = 0; i < golds.size(); ++i) add(golds[i], predictions[i]);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.d_ != d_) throw UsageError("cannot merge confusion matrices of different sizes");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t t = 0;
  for (std::size_t v : counts_) t += v;
  return t;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion) {
  const std::size_t d = confusion.num_classes();
  MetricsReport r;
  r.confusion = confusion;
  r.total = confusion.total();
  r.per_class.resize(d);
  std::size_t correct = 0;
  double weighted = 0.0;
  double macro = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t tp = confusion.at(c, c), fp = 0, fn = 0;
    for (std::size_t k = 0; k < d; ++k) {
      if (k == c) continue;
      fp += confusion.at(k, c);
      fn += confusion.at(c, k);
    }
    ClassMetrics& m = r.per_class[c];
    m.support = tp + fn;
    m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    // Equals 2PR/(P+R) and is 0 exactly when P+R is 0.
    m.f1 = tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    correct += tp;
    weighted += static_cast<double>(m.support) * m.f1;
    macro += m.f1;
  }
  if (r.total > 0) {
    r.weighted_f1 = weighted / static_cast<double>(r.total);
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  }
  if (d > 0) r.macro_f1 = macro / static_cast<double>(d);
  return r;
}

MetricsReport weighted_f1(std::span<const std::size_t> predictions,
                          std::span<const std::size_t> golds, std::size_t num_classes) {
  if (predictions.empty()) throw UsageError("weighted_f1: no predictions");
  ConfusionMatrix cm(num_classes);
  cm.add(golds, predictions);
  return metrics_from_confusion(cm);
}

std::string report_to_json(const MetricsReport& report, const std::vector<std::string>& label_names) {
  nlohmann::ordered_json j;
  j["total"] = report.total;
  j["weighted_f1"] = report.weighted_f1;
  j["macro_f1"] = report.macro_f1;
  j["accuracy"] = report.accuracy;
  j["per_class"] = nlohmann::ordered_json::array();
  const std::size_t d = report.per_class.size();
  for (std::size_t c = 0; c < d; ++c) {
    const ClassMetrics& m = report.per_class[c];
    j["per_class"].push_back({{"label", c < label_names.size() ? label_names[c] : std::to_string(c)},
                              {"precision", m.precision},
                              {"recall", m.recall},
                              {"f1", m.f1},
                              {"support", m.support}});
  }
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t g = 0; g < d; ++g) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < d; ++p) row.push_back(report.confusion.at(g, p));
    rows.push_back(std::move(row));
  }
  j["confusion"] = std::move(rows);
  return j.dump(2);
}

std::string format_report(const MetricsReport& report, const std::vector<std::string>& label_names) {
  const std::size_t d = report.per_class.size();
  auto name = [&](std::size_t c) {
    return c < label_names.size() ? label_names[c] : std::to_string(c);
  };
  std::size_t width = 8;
  for (std::size_t c = 0; c < d; ++c) width = std::max(width, name(c).size() + 2);

  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(static_cast<int>(width)) << "class" << std::right << std::setw(11)
      << "precision" << std::setw(9) << "recall" << std::setw(9) << "f1" << std::setw(9)
      << "support" << '\n';
  for (std::size_t c = 0; c < d; ++c) {
    const ClassMetrics& m = report.per_class[c];
    out << std::left << std::setw(static_cast<int>(width)) << name(c) << std::right
        << std::setw(11) << m.precision << std::setw(9) << m.recall << std::setw(9) << m.f1
        << std::setw(9) << m.support << '\n';
  }
  out << '\n'
      << "weighted F1 " << report.weighted_f1 << "  macro F1 " << report.macro_f1 << "  accuracy "
      << report.accuracy << "  (" << report.total << " utterances)\n\n";
  out << "confusion (rows gold, cols predicted)\n";
  for (std::size_t g = 0; g < d; ++g) {
    out << std::left << std::setw(static_cast<int>(width)) << name(g) << std::right;
    for (std::size_t p = 0; p < d; ++p) out << std::setw(7) << report.confusion.at(g, p);
    out << '\n';
  }
  return out.str();
}

}  // namespace disclstm
