#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace disclstm {

struct Utterance {
  std::size_t index = 0;
  std::string speaker;
  std::optional<std::string> text;
  std::size_t label = 0;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

/// Directed discourse link from an earlier utterance to a later one.
struct Edge {
  std::size_t src = 0;
  std::size_t tgt = 0;
  std::optional<std::string> relation;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;
  std::vector<Edge> edges;

  std::size_t size() const noexcept { return utterances.size(); }
  std::vector<std::size_t> labels() const;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

enum class Split { kTrain, kDev, kTest };
inline constexpr std::array<Split, 3> kAllSplits = {Split::kTrain, Split::kDev, Split::kTest};
std::string_view split_name(Split split) noexcept;
Split parse_split(std::string_view name);

/// MELD emotion order: anger, disgust, sadness, joy, neutral, surprise, fear.
const std::vector<std::string>& meld_label_names();

struct Corpus {
  std::vector<Dialogue> train;
  std::vector<Dialogue> dev;
  std::vector<Dialogue> test;
  std::size_t num_classes = 7;
  std::vector<std::string> label_names = meld_label_names();

  std::vector<Dialogue>& split(Split s);
  const std::vector<Dialogue>& split(Split s) const;
  std::size_t dialogue_count() const noexcept { return train.size() + dev.size() + test.size(); }

  /// Checks every invariant (edge order, label range, unique ids, contiguous
  /// utterance indices). Throws FormatError on the first violation.
  void validate() const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Reads one dialogue-per-line file. Labels are checked against
/// `num_classes`. Duplicate (src, tgt) edges collapse to the first one.
std::vector<Dialogue> load_dialogues(const std::filesystem::path& path, std::size_t num_classes);
void save_dialogues(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues);

/// Parses a single dialogue record; `line` is used only for diagnostics.
Dialogue parse_dialogue(std::string_view record, std::size_t num_classes, std::size_t line = 0);
std::string serialize_dialogue(const Dialogue& dialogue);

/// A corpus directory holds `corpus.json` ({num_classes, label_names},
/// optional) and `train.jsonl`, `dev.jsonl`, `test.jsonl` (each optional).
Corpus load_corpus(const std::filesystem::path& dir);
void save_corpus(const std::filesystem::path& dir, const Corpus& corpus);

}  // namespace disclstm
