#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "disclstm/corpus.hpp"
#include "disclstm/embeddings.hpp"
#include "disclstm/tensor.hpp"

namespace disclstm {

enum class SyntheticTask {
  /// Label depends only on the utterance's own embedding.
  kLocal,
  /// Label of a non-root utterance depends only on the embedding of its
  /// discourse predecessor.
  kDiscourse,
};

std::string_view task_name(SyntheticTask task) noexcept;
SyntheticTask parse_task(std::string_view name);

struct SyntheticConfig {
  std::size_t n_dialogues = 20;  // train split
  std::size_t dev_dialogues = 0;
  std::size_t test_dialogues = 0;
  std::size_t len_min = 4;
  std::size_t len_max = 8;
  std::size_t dim = 16;
  std::size_t num_classes = 3;
  SyntheticTask task = SyntheticTask::kLocal;
  /// Discourse task: probability that a non-initial utterance opens a new
  /// thread (a root with no predecessor) instead of replying to one.
  double root_probability = 0.3;

  void validate() const;
};

/// Labelling rule shared by both tasks: argmax of a fixed random linear map,
/// ties to the lowest class.
struct SyntheticRule {
  Tensor projection;  // num_classes x dim

  std::size_t label(std::span<const double> embedding) const;
};

struct SyntheticData {
  Corpus corpus;
  EmbeddingStore embeddings;
  SyntheticRule rule;
};

/// Deterministic in (cfg, seed). Embedding values are exactly representable
/// as float32 so written files reload bit-identically.
///
/// Discourse task layout: utterance 0 is a root; every later utterance is a
/// root with probability `root_probability`, otherwise it replies to one
/// earlier root chosen uniformly (single incoming edge). Roots are labelled
/// by their own embedding, replies by their predecessor's. Local task: random
/// reply tree (each i > 0 links from a uniform earlier utterance), labels by
/// own embedding.
SyntheticData generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

}  // namespace disclstm
