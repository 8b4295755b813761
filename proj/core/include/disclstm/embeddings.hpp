#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "disclstm/tensor.hpp"

namespace disclstm {

struct Corpus;

/// Precomputed utterance embeddings, one n x dim matrix per dialogue.
/// Stored as 32-bit floats on disk and widened to 64-bit on load.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t dialogue_count() const noexcept { return rows_.size(); }
  std::size_t row_count() const noexcept;

  /// Takes an n x dim matrix. Rejects duplicates, width mismatches and
  /// non-finite values.
  void insert(const std::string& dialogue_id, Tensor rows);
  bool contains(const std::string& dialogue_id) const { return rows_.count(dialogue_id) != 0; }
  /// Throws FormatError naming the id when absent.
  const Tensor& at(const std::string& dialogue_id) const;

  /// Dialogue ids in manifest order.
  const std::vector<std::string>& order() const noexcept { return order_; }

  /// Every corpus utterance has exactly one row and every row belongs to a
  /// corpus utterance.
  void check_covers(const Corpus& corpus) const;

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> order_;
  std::map<std::string, Tensor> rows_;
};

/// Manifest: {"dim", "dtype":"f32", "rows", "order":[{"dialogue_id","rows"}]}.
/// The binary file holds the rows of every listed dialogue, concatenated in
/// manifest order, as little-endian float32.
EmbeddingStore load_embeddings(const std::filesystem::path& bin_path,
                               const std::filesystem::path& manifest_path);
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& bin_path,
                     const std::filesystem::path& manifest_path);

}  // namespace disclstm
