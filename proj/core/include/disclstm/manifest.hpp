#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "disclstm/corpus.hpp"

namespace disclstm {

struct SplitCounts {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;

  std::size_t get(Split s) const noexcept;
  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct ExpectedCounts {
  std::optional<SplitCounts> dialogues;
  std::optional<SplitCounts> utterances;
};

struct CountCheck {
  std::string quantity;  // "dialogues" or "utterances"
  Split split = Split::kTrain;
  std::size_t actual = 0;
  std::size_t expected = 0;
  std::int64_t delta() const noexcept {
    return static_cast<std::int64_t>(actual) - static_cast<std::int64_t>(expected);
  }
};

struct ManifestReport {
  SplitCounts dialogues;
  SplitCounts utterances;
  std::vector<std::size_t> label_histogram;
  std::vector<CountCheck> checks;
  bool pass = true;
};

/// Published M-MELD statistics for "french", "greek", "spanish" and
/// "polish". Returns nullopt for any other language.
std::optional<ExpectedCounts> mmeld_expected_counts(std::string_view language);

/// Compares actual against expected counts. Mismatches are reported, not
/// thrown; with no expectations the report passes trivially.
ManifestReport validate_manifest(const Corpus& corpus, const ExpectedCounts& expected);

std::string format_manifest_report(const ManifestReport& report,
                                   const std::vector<std::string>& label_names);

}  // namespace disclstm
