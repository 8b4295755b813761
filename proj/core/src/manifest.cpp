#include "disclstm/manifest.hpp"

#include <iomanip>
#include <sstream>

namespace disclstm {

std::size_t SplitCounts::get(Split s) const noexcept {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kDev: return dev;
    case Split::kTest: return test;
  }
  return 0;
}

std::optional<ExpectedCounts> mmeld_expected_counts(std::string_view language) {
  // Dialogue and utterance counts per split as published with M-MELD.
  if (language == "french") return ExpectedCounts{SplitCounts{633, 97, 224}, SplitCounts{6537, 964, 2198}};
  if (language == "greek") return ExpectedCounts{SplitCounts{870, 103, 240}, SplitCounts{9003, 1062, 2366}};
  if (language == "spanish") return ExpectedCounts{SplitCounts{769, 111, 268}, SplitCounts{7890, 1064, 2546}};
  if (language == "polish") return ExpectedCounts{SplitCounts{858, 96, 235}, SplitCounts{8928, 989, 2324}};
  return std::nullopt;
}

ManifestReport validate_manifest(const Corpus& corpus, const ExpectedCounts& expected) {
  ManifestReport report;
  report.label_histogram.assign(corpus.num_classes, 0);
  auto tally = [&](Split s, std::size_t& dialogues, std::size_t& utterances) {
    for (const Dialogue& d : corpus.split(s)) {
      ++dialogues;
      utterances += d.size();
      for (const Utterance& u : d.utterances) {
        if (u.label < report.label_histogram.size()) ++report.label_histogram[u.label];
      }
    }
  };
  tally(Split::kTrain, report.dialogues.train, report.utterances.train);
  tally(Split::kDev, report.dialogues.dev, report.utterances.dev);
  tally(Split::kTest, report.dialogues.test, report.utterances.test);

  auto compare = [&](const char* quantity, const SplitCounts& actual,
                     const std::optional<SplitCounts>& want) {
    if (!want) return;
    for (Split s : kAllSplits) {
      CountCheck check{quantity, s, actual.get(s), want->get(s)};
      if (check.delta() != 0) report.pass = false;
      report.checks.push_back(check);
    }
  };
  compare("dialogues", report.dialogues, expected.dialogues);
  compare("utterances", report.utterances, expected.utterances);
  return report;
}

std::string format_manifest_report(const ManifestReport& report,
                                   const std::vector<std::string>& label_names) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "quantity" << std::setw(7) << "split" << std::right
      << std::setw(10) << "actual" << std::setw(10) << "expected" << std::setw(8) << "delta"
      << '\n';
  if (report.checks.empty()) {
    for (Split s : kAllSplits) {
      out << std::left << std::setw(12) << "dialogues" << std::setw(7) << split_name(s)
          << std::right << std::setw(10) << report.dialogues.get(s) << std::setw(10) << "-"
          << std::setw(8) << "-" << '\n';
      out << std::left << std::setw(12) << "utterances" << std::setw(7) << split_name(s)
          << std::right << std::setw(10) << report.utterances.get(s) << std::setw(10) << "-"
          << std::setw(8) << "-" << '\n';
    }
  }
  for (const CountCheck& c : report.checks) {
    out << std::left << std::setw(12) << c.quantity << std::setw(7) << split_name(c.split)
        << std::right << std::setw(10) << c.actual << std::setw(10) << c.expected << std::setw(8)
        << std::showpos << c.delta() << std::noshowpos << '\n';
  }
  out << "labels:";
  for (std::size_t c = 0; c < report.label_histogram.size(); ++c) {
    out << ' ' << (c < label_names.size() ? label_names[c] : std::to_string(c)) << '='
        << report.label_histogram[c];
  }
  out << '\n' << "result: " << (report.pass ? "PASS" : "FAIL") << '\n';
  return out.str();
}

}  // namespace disclstm
