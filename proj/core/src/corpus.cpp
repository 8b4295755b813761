#include "disclstm/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "disclstm/error.hpp"

namespace disclstm {

using json = nlohmann::ordered_json;

namespace {

std::string where(std::size_t line) {
  return line == 0 ? std::string() : "line " + std::to_string(line) + ": ";
}

std::size_t as_index(const json& v, std::size_t line, const char* what) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw FormatError(where(line) + what + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

std::vector<std::size_t> Dialogue::labels() const {
  std::vector<std::size_t> out;
  out.reserve(utterances.size());
  for (const Utterance& u : utterances) out.push_back(u.label);
  return out;
}

std::string_view split_name(Split split) noexcept {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw UsageError("unknown split '" + std::string(name) + "' (expected train, dev or test)");
}

const std::vector<std::string>& meld_label_names() {
  static const std::vector<std::string> names = {"anger",   "disgust",  "sadness", "joy",
                                                 "neutral", "surprise", "fear"};
  return names;
}

std::vector<Dialogue>& Corpus::split(Split s) {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kDev: return dev;
    case Split::kTest: return test;
  }
  return train;
}

const std::vector<Dialogue>& Corpus::split(Split s) const {
  return const_cast<Corpus&>(*this).split(s);
}

void Corpus::validate() const {
  if (num_classes == 0) throw FormatError("corpus declares zero classes");
  if (label_names.size() != num_classes) {
    throw FormatError("corpus declares " + std::to_string(num_classes) + " classes but " +
                      std::to_string(label_names.size()) + " label names");
  }
  std::set<std::string> ids;
  for (Split s : kAllSplits) {
    for (const Dialogue& d : split(s)) {
      if (!ids.insert(d.id).second) throw FormatError("duplicate dialogue id '" + d.id + "'");
      if (d.utterances.empty()) throw FormatError("dialogue '" + d.id + "' has no utterances");
      for (std::size_t i = 0; i < d.utterances.size(); ++i) {
        if (d.utterances[i].index != i) {
          throw FormatError("dialogue '" + d.id + "': utterance index mismatch at " +
                            std::to_string(i));
        }
        if (d.utterances[i].label >= num_classes) {
          throw FormatError("dialogue '" + d.id + "': label " +
                            std::to_string(d.utterances[i].label) + " out of range");
        }
      }
      std::set<std::pair<std::size_t, std::size_t>> seen;
      for (const Edge& e : d.edges) {
        if (e.src >= e.tgt) throw FormatError("dialogue '" + d.id + "': edge src must precede tgt");
        if (e.tgt >= d.size()) throw FormatError("dialogue '" + d.id + "': edge index out of range");
        if (!seen.emplace(e.src, e.tgt).second) {
          throw FormatError("dialogue '" + d.id + "': duplicate edge");
        }
      }
    }
  }
}

Dialogue parse_dialogue(std::string_view record, std::size_t num_classes, std::size_t line) {
  json j;
  try {
    j = json::parse(record);
  } catch (const json::parse_error& e) {
    throw FormatError(where(line) + "malformed record: " + e.what());
  }
  if (!j.is_object()) throw FormatError(where(line) + "record must be an object");
  if (!j.contains("id") || !j["id"].is_string()) throw FormatError(where(line) + "missing string 'id'");
  if (!j.contains("utterances") || !j["utterances"].is_array()) {
    throw FormatError(where(line) + "missing array 'utterances'");
  }

  Dialogue d;
  d.id = j["id"].get<std::string>();
  for (const json& u : j["utterances"]) {
    if (!u.is_object()) throw FormatError(where(line) + "utterance must be an object");
    Utterance utt;
    utt.index = d.utterances.size();
    if (u.contains("speaker")) {
      if (!u["speaker"].is_string()) throw FormatError(where(line) + "speaker must be a string");
      utt.speaker = u["speaker"].get<std::string>();
    }
    if (u.contains("text") && !u["text"].is_null()) {
      if (!u["text"].is_string()) throw FormatError(where(line) + "text must be a string");
      utt.text = u["text"].get<std::string>();
    }
    if (!u.contains("label")) throw FormatError(where(line) + "utterance without label");
    utt.label = as_index(u["label"], line, "label");
    if (utt.label >= num_classes) {
      throw FormatError(where(line) + "label " + std::to_string(utt.label) +
                        " out of range [0," + std::to_string(num_classes) + ")");
    }
    d.utterances.push_back(std::move(utt));
  }
  if (d.utterances.empty()) throw FormatError(where(line) + "dialogue has no utterances");

  std::set<std::pair<std::size_t, std::size_t>> seen;
  if (j.contains("edges")) {
    if (!j["edges"].is_array()) throw FormatError(where(line) + "'edges' must be an array");
    for (const json& e : j["edges"]) {
      if (!e.is_array() || e.size() < 2 || e.size() > 3) {
        throw FormatError(where(line) + "edge must be [src, tgt] or [src, tgt, relation]");
      }
      Edge edge;
      edge.src = as_index(e[0], line, "edge src");
      edge.tgt = as_index(e[1], line, "edge tgt");
      if (e.size() == 3 && !e[2].is_null()) {
        if (!e[2].is_string()) throw FormatError(where(line) + "edge relation must be a string");
        edge.relation = e[2].get<std::string>();
      }
      if (edge.src >= edge.tgt) throw FormatError(where(line) + "edge src must precede tgt");
      if (edge.tgt >= d.size()) {
        throw FormatError(where(line) + "edge target " + std::to_string(edge.tgt) +
                          " out of range for " + std::to_string(d.size()) + " utterances");
      }
      if (!seen.emplace(edge.src, edge.tgt).second) continue;
      d.edges.push_back(std::move(edge));
    }
  }
  return d;
}

std::string serialize_dialogue(const Dialogue& d) {
  json j;
  j["id"] = d.id;
  j["utterances"] = json::array();
  for (const Utterance& u : d.utterances) {
    json ju;
    ju["speaker"] = u.speaker;
    if (u.text) ju["text"] = *u.text;
    ju["label"] = u.label;
    j["utterances"].push_back(std::move(ju));
  }
  j["edges"] = json::array();
  for (const Edge& e : d.edges) {
    json je = json::array({e.src, e.tgt});
    if (e.relation) je.push_back(*e.relation);
    j["edges"].push_back(std::move(je));
  }
  return j.dump();
}

std::vector<Dialogue> load_dialogues(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dialogue file " + path.string());
  std::vector<Dialogue> out;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Dialogue d = parse_dialogue(text, num_classes, line);
    if (!ids.insert(d.id).second) {
      throw FormatError(path.string() + ": line " + std::to_string(line) +
                        ": duplicate dialogue id '" + d.id + "'");
    }
    out.push_back(std::move(d));
  }
  return out;
}

void save_dialogues(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const Dialogue& d : dialogues) out << serialize_dialogue(d) << '\n';
  if (!out) throw FormatError("write failed for " + path.string());
}

Corpus load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw FormatError("corpus directory not found: " + dir.string());
  }
  Corpus corpus;
  const auto meta_path = dir / "corpus.json";
  if (std::filesystem::exists(meta_path)) {
    std::ifstream in(meta_path);
    json meta;
    try {
      meta = json::parse(in);
    } catch (const json::parse_error& e) {
      throw FormatError(meta_path.string() + ": " + e.what());
    }
    if (meta.contains("label_names")) {
      corpus.label_names = meta["label_names"].get<std::vector<std::string>>();
      corpus.num_classes = corpus.label_names.size();
    }
    if (meta.contains("num_classes")) corpus.num_classes = meta["num_classes"].get<std::size_t>();
    if (!meta.contains("label_names")) {
      corpus.label_names.clear();
      for (std::size_t c = 0; c < corpus.num_classes; ++c) {
        corpus.label_names.push_back(c < meld_label_names().size() && corpus.num_classes == 7
                                         ? meld_label_names()[c]
                                         : "class" + std::to_string(c));
      }
    }
  }
  bool any = false;
  for (Split s : kAllSplits) {
    const auto file = dir / (std::string(split_name(s)) + ".jsonl");
    if (!std::filesystem::exists(file)) continue;
    any = true;
    try {
      corpus.split(s) = load_dialogues(file, corpus.num_classes);
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      throw FormatError(msg.rfind(file.string(), 0) == 0 ? msg : file.string() + ": " + msg);
    }
  }
  if (!any) throw FormatError("no split files (train/dev/test.jsonl) in " + dir.string());
  corpus.validate();
  return corpus;
}

void save_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  json meta;
  meta["num_classes"] = corpus.num_classes;
  meta["label_names"] = corpus.label_names;
  {
    std::ofstream out(dir / "corpus.json", std::ios::trunc);
    if (!out) throw FormatError("cannot write " + (dir / "corpus.json").string());
    out << meta.dump(2) << '\n';
  }
  for (Split s : kAllSplits) {
    save_dialogues(dir / (std::string(split_name(s)) + ".jsonl"), corpus.split(s));
  }
}

}  // namespace disclstm
