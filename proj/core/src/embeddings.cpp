#include "disclstm/embeddings.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "disclstm/corpus.hpp"
#include "disclstm/error.hpp"

namespace disclstm {

using json = nlohmann::ordered_json;

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

float decode_f32(const unsigned char* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

void encode_f32(float v, unsigned char* p) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  p[0] = static_cast<unsigned char>(bits);
  p[1] = static_cast<unsigned char>(bits >> 8);
  p[2] = static_cast<unsigned char>(bits >> 16);
  p[3] = static_cast<unsigned char>(bits >> 24);
}

}  // namespace

std::size_t EmbeddingStore::row_count() const noexcept {
  std::size_t total = 0;
  for (const auto& [id, m] : rows_) total += m.rows();
  return total;
}

void EmbeddingStore::insert(const std::string& dialogue_id, Tensor rows) {
  if (rows.cols() != dim_) {
    throw FormatError("embeddings for '" + dialogue_id + "' have width " +
                      std::to_string(rows.cols()) + ", store dim is " + std::to_string(dim_));
  }
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t c = 0; c < rows.cols(); ++c) {
      if (!std::isfinite(rows(r, c))) {
        throw FormatError("non-finite embedding value at dialogue '" + dialogue_id + "' row " +
                          std::to_string(r) + " col " + std::to_string(c));
      }
    }
  }
  if (!rows_.emplace(dialogue_id, std::move(rows)).second) {
    throw FormatError("duplicate embedding entry for dialogue '" + dialogue_id + "'");
  }
  order_.push_back(dialogue_id);
}

const Tensor& EmbeddingStore::at(const std::string& dialogue_id) const {
  auto it = rows_.find(dialogue_id);
  if (it == rows_.end()) throw FormatError("no embeddings for dialogue '" + dialogue_id + "'");
  return it->second;
}

void EmbeddingStore::check_covers(const Corpus& corpus) const {
  std::size_t matched = 0;
  for (Split s : kAllSplits) {
    for (const Dialogue& d : corpus.split(s)) {
      const Tensor& m = at(d.id);
      if (m.rows() != d.size()) {
        throw FormatError("dialogue '" + d.id + "' has " + std::to_string(d.size()) +
                          " utterances but " + std::to_string(m.rows()) + " embedding rows");
      }
      ++matched;
    }
  }
  if (matched != rows_.size()) {
    throw FormatError("embedding store has " + std::to_string(rows_.size() - matched) +
                      " dialogues absent from the corpus");
  }
}

EmbeddingStore load_embeddings(const std::filesystem::path& bin_path,
                               const std::filesystem::path& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw FormatError("cannot open embedding manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  if (!manifest.contains("dim") || !manifest["dim"].is_number_unsigned() ||
      manifest["dim"].get<std::size_t>() == 0) {
    throw FormatError(manifest_path.string() + ": 'dim' must be a positive integer");
  }
  if (manifest.value("dtype", std::string("f32")) != "f32") {
    throw FormatError(manifest_path.string() + ": only dtype f32 is supported");
  }
  if (!manifest.contains("order") || !manifest["order"].is_array()) {
    throw FormatError(manifest_path.string() + ": missing 'order' array");
  }
  const std::size_t dim = manifest["dim"].get<std::size_t>();
  std::size_t total_rows = 0;
  for (const json& entry : manifest["order"]) {
    if (!entry.contains("dialogue_id") || !entry.contains("rows")) {
      throw FormatError(manifest_path.string() + ": order entries need dialogue_id and rows");
    }
    total_rows += entry["rows"].get<std::size_t>();
  }
  if (manifest.contains("rows") && manifest["rows"].get<std::size_t>() != total_rows) {
    throw FormatError(manifest_path.string() + ": 'rows' disagrees with the sum over 'order'");
  }

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw FormatError("cannot open embedding binary " + bin_path.string());
  bin.seekg(0, std::ios::end);
  const auto actual_bytes = static_cast<std::uintmax_t>(bin.tellg());
  bin.seekg(0, std::ios::beg);
  const std::uintmax_t expected_bytes = static_cast<std::uintmax_t>(total_rows) * dim * 4;
  if (actual_bytes != expected_bytes) {
    throw FormatError("size mismatch: " + bin_path.string() + " has " +
                      std::to_string(actual_bytes) + " bytes, manifest implies " +
                      std::to_string(expected_bytes));
  }

  EmbeddingStore store(dim);
  std::vector<unsigned char> buffer;
  for (const json& entry : manifest["order"]) {
    const auto id = entry["dialogue_id"].get<std::string>();
    const auto rows = entry["rows"].get<std::size_t>();
    buffer.resize(rows * dim * 4);
    bin.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
    if (!bin) throw FormatError("size mismatch: short read in " + bin_path.string());
    Tensor m(rows, dim);
    for (std::size_t i = 0; i < rows * dim; ++i) m[i] = decode_f32(buffer.data() + 4 * i);
    store.insert(id, std::move(m));
  }
  return store;
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& bin_path,
                     const std::filesystem::path& manifest_path) {
  json manifest;
  manifest["dim"] = store.dim();
  manifest["dtype"] = "f32";
  manifest["rows"] = store.row_count();
  manifest["order"] = json::array();

  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw FormatError("cannot write " + bin_path.string());
  std::vector<unsigned char> buffer;
  for (const std::string& id : store.order()) {
    const Tensor& m = store.at(id);
    buffer.resize(m.size() * 4);
    for (std::size_t i = 0; i < m.size(); ++i) {
      encode_f32(static_cast<float>(m[i]), buffer.data() + 4 * i);
    }
    bin.write(reinterpret_cast<const char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size()));
    manifest["order"].push_back({{"dialogue_id", id}, {"rows", m.rows()}});
  }
  if (!bin) throw FormatError("write failed for " + bin_path.string());

  std::ofstream mf(manifest_path, std::ios::trunc);
  if (!mf) throw FormatError("cannot write " + manifest_path.string());
  mf << manifest.dump(2) << '\n';
}

}  // namespace disclstm
