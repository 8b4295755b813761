#include "disclstm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "disclstm/error.hpp"
#include "disclstm/graph.hpp"
#include "disclstm/rng.hpp"

namespace disclstm {

void TrainConfig::validate() const {
  if (batch_size == 0) throw UsageError("batch_size must be >= 1");
  // lr = 0 is allowed: it freezes parameters, which is useful as a control.
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw UsageError("learning_rate must be finite and >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw UsageError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw UsageError("adam eps must be positive");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) throw UsageError("grad_clip_norm must be positive");
}

AdamState AdamState::like(const ModelParams& params) {
  AdamState s;
  for_each_parameter(params, [&](const std::string&, const Tensor& t) {
    s.m.push_back(Tensor::zeros_like(t));
    s.v.push_back(Tensor::zeros_like(t));
  });
  return s;
}

// ---------------------------------------------------------------------------

double loss(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rows() != labels.size()) throw ShapeError("loss: one label per logit row required");
  if (labels.empty()) throw UsageError("loss: no utterances");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (labels[i] >= logits.cols()) {
      throw UsageError("loss: label " + std::to_string(labels[i]) + " out of range");
    }
    const auto z = logits.row(i);
    const double top = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - top);
    total += top + std::log(s) - z[labels[i]];
  }
  return total / static_cast<double>(labels.size());
}

ad::Var dialogue_loss_sum(std::span<const ad::Var> logits, std::span<const std::size_t> labels,
                          std::span<const double> class_weights) {
  if (logits.size() != labels.size() || logits.empty()) {
    throw ShapeError("dialogue_loss_sum: one label per utterance required");
  }
  ad::Tape& tape = logits.front().tape();
  ad::Var total;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    ad::Var term = ad::cross_entropy(logits[i], labels[i]);
    if (!class_weights.empty()) {
      term = ad::matmul(term, tape.constant(Tensor(1, 1, class_weights[labels[i]])));
    }
    total = total.valid() ? ad::add(total, term) : term;
  }
  return total;
}

std::vector<double> inverse_frequency_weights(std::span<const Dialogue> dialogues,
                                              std::size_t num_classes) {
  std::vector<double> counts(num_classes, 0.0);
  double n = 0.0;
  for (const Dialogue& d : dialogues) {
    for (const Utterance& u : d.utterances) {
      counts.at(u.label) += 1.0;
      n += 1.0;
    }
  }
  std::vector<double> w(num_classes, 0.0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    w[c] = counts[c] > 0.0 ? n / (static_cast<double>(num_classes) * counts[c]) : 0.0;
  }
  return w;
}

BatchGradient batch_gradient(const ModelParams& params, std::span<const Dialogue* const> batch,
                             const EmbeddingStore& embeddings,
                             std::span<const double> class_weights) {
  BatchGradient out;
  out.grads = ModelParams::zeros(params.config);
  double loss_sum = 0.0;
  for (const Dialogue* d : batch) {
    ad::Tape tape;
    const BoundParams bound = bind(tape, params);
    const auto logits = forward(tape, bound, embeddings.at(d->id), build_graph(*d));
    const std::vector<std::size_t> labels = d->labels();
    const ad::Var l = dialogue_loss_sum(logits, labels, class_weights);
    tape.backward(l);
    accumulate_gradients(tape, bound, out.grads);
    loss_sum += l.scalar();
    out.utterances += d->size();
  }
  if (out.utterances == 0) throw UsageError("batch_gradient: empty batch");
  const double inv = 1.0 / static_cast<double>(out.utterances);
  for_each_parameter(out.grads, [&](const std::string&, Tensor& t) {
    for (double& v : t.data()) v *= inv;
  });
  out.loss = loss_sum * inv;
  return out;
}

// ---------------------------------------------------------------------------

double global_norm(std::span<const Tensor> tensors) {
  double sq = 0.0;
  for (const Tensor& t : tensors) {
    for (double v : t.data()) sq += v * v;
  }
  return std::sqrt(sq);
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const TrainConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(grads[k]) || !state.m[k].same_shape(grads[k]) ||
        !state.v[k].same_shape(grads[k])) {
      throw ShapeError("adam_step: shape mismatch at tensor " + std::to_string(k));
    }
  }
  double clip = 1.0;
  if (cfg.grad_clip_norm) {
    const double norm = global_norm(grads);
    if (norm > *cfg.grad_clip_norm) clip = *cfg.grad_clip_norm / norm;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(cfg.beta1, t);
  const double correct2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    const Tensor& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] * clip;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg) {
  std::vector<Tensor*> ptrs;
  for_each_parameter(params, [&](const std::string&, Tensor& t) { ptrs.push_back(&t); });
  const std::vector<Tensor> flat = flatten(grads);
  adam_step(ptrs, flat, state, cfg);
}

// ---------------------------------------------------------------------------

MetricsReport evaluate(const ModelParams& params, std::span<const Dialogue> dialogues,
                       const EmbeddingStore& embeddings, GraphMode mode) {
  if (dialogues.empty()) throw UsageError("evaluate: empty split");
  ConfusionMatrix cm(params.config.num_classes);
  for (const Dialogue& d : dialogues) {
    const DiscourseGraph graph = mode == GraphMode::kEdgeless ? edgeless_graph(d.size()) : build_graph(d);
    const std::vector<std::size_t> preds = predict(params, embeddings.at(d.id), graph);
    cm.add(d.labels(), preds);
  }
  return metrics_from_confusion(cm);
}

TrainState initial_state(const ModelConfig& model, const TrainConfig& cfg) {
  TrainState s;
  s.params = init_params(model, cfg.seed);
  s.best_params = s.params;
  s.adam = AdamState::like(s.params);
  return s;
}

void train_epochs(TrainState& state, const Corpus& corpus, const EmbeddingStore& embeddings,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (corpus.train.empty()) throw UsageError("train: empty train split");
  if (corpus.dev.empty()) throw UsageError("train: empty dev split");
  if (state.params.config.num_classes != corpus.num_classes) {
    throw UsageError("train: model has " + std::to_string(state.params.config.num_classes) +
                     " classes, corpus has " + std::to_string(corpus.num_classes));
  }
  for (const auto* split : {&corpus.train, &corpus.dev}) {
    for (const Dialogue& d : *split) {
      if (embeddings.at(d.id).rows() != d.size()) {
        throw FormatError("embedding rows do not match dialogue '" + d.id + "'");
      }
    }
  }
  const std::vector<double> weights =
      cfg.class_weighted ? inverse_frequency_weights(corpus.train, corpus.num_classes)
                         : std::vector<double>{};

  for (std::size_t epoch = state.next_epoch; epoch < cfg.epochs; ++epoch) {
    std::vector<const Dialogue*> order;
    order.reserve(corpus.train.size());
    for (const Dialogue& d : corpus.train) order.push_back(&d);
    Rng rng(derive_seed(cfg.seed, 0xe90c0000ULL + epoch));
    rng.shuffle(order);

    double loss_total = 0.0;
    std::size_t utterances = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const Dialogue* const> batch(order.data() + start, stop - start);
      const BatchGradient bg = batch_gradient(state.params, batch, embeddings, weights);
      if (!std::isfinite(bg.loss)) throw NumericError("non-finite training loss");
      loss_total += bg.loss * static_cast<double>(bg.utterances);
      utterances += bg.utterances;
      adam_step(state.params, bg.grads, state.adam, cfg);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_total / static_cast<double>(utterances);
    rec.dev_weighted_f1 = evaluate(state.params, corpus.dev, embeddings).weighted_f1;
    if (cfg.track_train_f1) {
      rec.train_weighted_f1 = evaluate(state.params, corpus.train, embeddings).weighted_f1;
    }
    state.history.epochs.push_back(rec);
    if (rec.dev_weighted_f1 > state.history.best_dev_weighted_f1) {
      state.history.best_dev_weighted_f1 = rec.dev_weighted_f1;
      state.history.best_epoch = epoch;
      state.best_params = state.params;
    }
    state.next_epoch = epoch + 1;
    if (on_epoch) on_epoch(state);
  }
}

TrainResult train(const Corpus& corpus, const EmbeddingStore& embeddings, const ModelConfig& model,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  TrainState state = initial_state(model, cfg);
  train_epochs(state, corpus, embeddings, cfg, on_epoch);
  return {std::move(state.best_params), std::move(state.history)};
}

}  // namespace disclstm
