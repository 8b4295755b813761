#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "disclstm/autodiff.hpp"
#include "disclstm/corpus.hpp"
#include "disclstm/embeddings.hpp"
#include "disclstm/metrics.hpp"
#include "disclstm/model.hpp"

namespace disclstm {

struct TrainConfig {
  std::size_t batch_size = 16;  // dialogues per optimizer step
  std::size_t epochs = 50;
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::optional<double> grad_clip_norm;
  /// Scale each utterance's loss by N / (d * count(label)) over the train split.
  bool class_weighted = false;
  /// Also record train weighted-F1 after every epoch.
  bool track_train_f1 = false;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  static AdamState like(const ModelParams& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_weighted_f1 = 0.0;
  std::optional<double> train_weighted_f1;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_dev_weighted_f1 = -1.0;

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

// ---------------------------------------------------------------------------
// Objective

/// Mean over rows of -log softmax(logits_i)[label_i], via log-sum-exp.
double loss(const Tensor& logits, std::span<const std::size_t> labels);

/// Sum (not mean) of per-utterance cross-entropy on the tape, optionally
/// weighted per class.
ad::Var dialogue_loss_sum(std::span<const ad::Var> logits, std::span<const std::size_t> labels,
                          std::span<const double> class_weights = {});

std::vector<double> inverse_frequency_weights(std::span<const Dialogue> dialogues,
                                              std::size_t num_classes);

struct BatchGradient {
  double loss = 0.0;  // mean over utterances
  std::size_t utterances = 0;
  ModelParams grads;  // gradient of `loss`
};

/// Gradient of the mean utterance loss over a batch of dialogues, built one
/// dialogue tape at a time and summed.
BatchGradient batch_gradient(const ModelParams& params, std::span<const Dialogue* const> batch,
                             const EmbeddingStore& embeddings,
                             std::span<const double> class_weights = {});

// ---------------------------------------------------------------------------
// Optimizer

/// Global L2 norm over all tensors.
double global_norm(std::span<const Tensor> tensors);

/// Bias-corrected Adam. When cfg.grad_clip_norm is set, gradients are first
/// rescaled so their global norm does not exceed it.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const TrainConfig& cfg);
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Loop

enum class GraphMode {
  kDiscourse,
  /// Evaluate with every edge removed (ablation).
  kEdgeless,
};

MetricsReport evaluate(const ModelParams& params, std::span<const Dialogue> dialogues,
                       const EmbeddingStore& embeddings, GraphMode mode = GraphMode::kDiscourse);

/// Everything needed to continue training exactly where it stopped.
struct TrainState {
  ModelParams params;
  ModelParams best_params;
  AdamState adam;
  TrainHistory history;
  std::size_t next_epoch = 0;
};

TrainState initial_state(const ModelConfig& model, const TrainConfig& cfg);

using EpochCallback = std::function<void(const TrainState&)>;

/// Runs epochs state.next_epoch .. cfg.epochs-1. Each epoch shuffles the
/// train split with a seed derived from (cfg.seed, epoch), takes one Adam
/// step per batch, then scores the dev split; the best dev epoch (first on
/// ties) is kept in best_params.
void train_epochs(TrainState& state, const Corpus& corpus, const EmbeddingStore& embeddings,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct TrainResult {
  ModelParams best;
  TrainHistory history;
};

TrainResult train(const Corpus& corpus, const EmbeddingStore& embeddings, const ModelConfig& model,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace disclstm
