#include "disclstm/synthetic.hpp"

#include <cmath>
#include <string>

#include "disclstm/error.hpp"
#include "disclstm/rng.hpp"

namespace disclstm {

std::string_view task_name(SyntheticTask task) noexcept {
  return task == SyntheticTask::kLocal ? "local" : "discourse";
}

SyntheticTask parse_task(std::string_view name) {
  if (name == "local") return SyntheticTask::kLocal;
  if (name == "discourse") return SyntheticTask::kDiscourse;
  throw UsageError("unknown synthetic task '" + std::string(name) + "'");
}

void SyntheticConfig::validate() const {
  if (dim < 2) throw UsageError("synthetic dim must be >= 2");
  if (num_classes < 2) throw UsageError("synthetic num_classes must be >= 2");
  if (len_min < 2) throw UsageError("synthetic len_range min must be >= 2");
  if (len_max < len_min) throw UsageError("synthetic len_range max must be >= min");
  if (!(root_probability >= 0.0 && root_probability < 1.0)) {
    throw UsageError("synthetic root_probability must lie in [0, 1)");
  }
}

std::size_t SyntheticRule::label(std::span<const double> embedding) const {
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t c = 0; c < projection.rows(); ++c) {
    double score = 0.0;
    for (std::size_t k = 0; k < projection.cols(); ++k) score += projection(c, k) * embedding[k];
    if (c == 0 || score > best_score) {
      best = c;
      best_score = score;
    }
  }
  return best;
}

namespace {

Dialogue make_dialogue(const SyntheticConfig& cfg, const SyntheticRule& rule, std::string id,
                       Rng& rng, Tensor& embeddings) {
  const std::size_t n = cfg.len_min + rng.below(cfg.len_max - cfg.len_min + 1);
  embeddings = Tensor(n, cfg.dim);
  for (double& v : embeddings.data()) v = static_cast<double>(static_cast<float>(rng.normal()));

  Dialogue d;
  d.id = std::move(id);
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < n; ++i) {
    Utterance u;
    u.index = i;
    u.speaker = (i % 2 == 0) ? "A" : "B";
    std::size_t source = i;  // whose embedding decides the label
    if (cfg.task == SyntheticTask::kLocal) {
      if (i > 0) d.edges.push_back(Edge{rng.below(i), i, std::string("reply")});
    } else if (i == 0 || rng.bernoulli(cfg.root_probability)) {
      roots.push_back(i);
    } else {
      source = roots[rng.below(roots.size())];
      d.edges.push_back(Edge{source, i, std::string("reply")});
    }
    u.label = rule.label(embeddings.row(source));
    d.utterances.push_back(std::move(u));
  }
  return d;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, 0x5e7));

  SyntheticData out;
  out.rule.projection = Tensor(cfg.num_classes, cfg.dim);
  for (double& v : out.rule.projection.data()) v = rng.normal();

  out.corpus.num_classes = cfg.num_classes;
  out.corpus.label_names.clear();
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    out.corpus.label_names.push_back("class" + std::to_string(c));
  }
  out.embeddings = EmbeddingStore(cfg.dim);

  const std::pair<Split, std::size_t> plan[] = {
      {Split::kTrain, cfg.n_dialogues}, {Split::kDev, cfg.dev_dialogues}, {Split::kTest, cfg.test_dialogues}};
  for (const auto& [split, count] : plan) {
    for (std::size_t k = 0; k < count; ++k) {
      Tensor rows;
      std::string id = std::string(split_name(split)) + "_" + std::to_string(k);
      Dialogue d = make_dialogue(cfg, out.rule, id, rng, rows);
      out.embeddings.insert(d.id, std::move(rows));
      out.corpus.split(split).push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace disclstm
