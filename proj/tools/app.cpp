#include "app.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "disclstm/checkpoint.hpp"
#include "disclstm/corpus.hpp"
#include "disclstm/embeddings.hpp"
#include "disclstm/error.hpp"
#include "disclstm/graph.hpp"
#include "disclstm/manifest.hpp"
#include "disclstm/metrics.hpp"
#include "disclstm/rng.hpp"

namespace disclstm::app {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("write failed for " + path.string());
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " path is required");
  if (!fs::exists(path)) throw FormatError(std::string(what) + " not found: " + path.string());
}

EmbeddingStore load_embedding_files(const fs::path& bin, const fs::path& manifest) {
  require_file(bin, "embeddings");
  const fs::path m = manifest.empty() ? default_manifest_path(bin) : manifest;
  require_file(m, "embeddings manifest");
  return load_embeddings(bin, m);
}

Corpus load_corpus_dir(const fs::path& dir) {
  require_file(dir, "corpus directory");
  return load_corpus(dir);
}

std::vector<Dialogue> select_split(const Corpus& corpus, const std::string& split) {
  if (split == "all") {
    std::vector<Dialogue> all;
    for (Split s : kAllSplits) {
      const auto& part = corpus.split(s);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  return corpus.split(parse_split(split));
}

void check_compatible(const ModelConfig& model, const Corpus& corpus, const EmbeddingStore& emb) {
  if (model.num_classes != corpus.num_classes) {
    throw UsageError("class count mismatch: checkpoint has d=" + std::to_string(model.num_classes) +
                     ", corpus has d=" + std::to_string(corpus.num_classes));
  }
  if (model.dim_u != emb.dim()) {
    throw UsageError("embedding width mismatch: checkpoint has dim_u=" +
                     std::to_string(model.dim_u) + ", embeddings have " +
                     std::to_string(emb.dim()));
  }
}

void write_report(const fs::path& stem, const MetricsReport& report,
                  const std::vector<std::string>& names) {
  write_text(fs::path(stem).concat(".json"), report_to_json(report, names) + "\n");
  write_text(fs::path(stem).concat(".txt"), format_report(report, names));
}

ModelConfig resolve_model(const RunConfig& cfg, const Corpus& corpus, const EmbeddingStore& emb) {
  ModelConfig model;
  model.dim_u = cfg.dim_u.value_or(emb.dim());
  model.dim_g = cfg.dim_g;
  model.dim_h = cfg.dim_h;
  model.layers = cfg.layers;
  model.num_classes = cfg.num_classes.value_or(corpus.num_classes);
  model.validate();
  check_compatible(model, corpus, emb);
  return model;
}

json optional_json(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

fs::path default_manifest_path(const fs::path& bin) {
  fs::path p = bin;
  p.replace_extension(".json");
  return p;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["corpus"] = cfg.corpus.string();
  j["embeddings"] = cfg.embeddings.string();
  j["embeddings_manifest"] = cfg.embeddings_manifest.string();
  j["out_dir"] = cfg.out_dir.string();
  j["model"] = {{"dim_u", optional_json(cfg.dim_u)},
                {"dim_g", cfg.dim_g},
                {"dim_h", cfg.dim_h},
                {"layers", cfg.layers},
                {"num_classes", optional_json(cfg.num_classes)}};
  j["train"] = json::parse(train_config_to_json(cfg.train));
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text, RunConfig cfg) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config file: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("config file must hold a JSON object");
  try {
    if (j.contains("corpus")) cfg.corpus = j["corpus"].get<std::string>();
    if (j.contains("embeddings")) cfg.embeddings = j["embeddings"].get<std::string>();
    if (j.contains("embeddings_manifest")) {
      cfg.embeddings_manifest = j["embeddings_manifest"].get<std::string>();
    }
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("model")) {
      const json& m = j["model"];
      auto opt = [&](const char* key, std::optional<std::size_t>& field) {
        if (!m.contains(key)) return;
        field = m[key].is_null() ? std::nullopt : std::optional(m[key].get<std::size_t>());
      };
      opt("dim_u", cfg.dim_u);
      opt("num_classes", cfg.num_classes);
      if (m.contains("dim_g")) cfg.dim_g = m["dim_g"].get<std::size_t>();
      if (m.contains("dim_h")) cfg.dim_h = m["dim_h"].get<std::size_t>();
      if (m.contains("layers")) cfg.layers = m["layers"].get<std::size_t>();
    }
    if (j.contains("train")) cfg.train = train_config_from_json(j["train"].dump(), cfg.train);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config file: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------

int cmd_train(const TrainOptions& opts, std::ostream& out) {
  RunConfig cfg = opts.run;
  if (cfg.out_dir.empty()) throw UsageError("--out is required");
  if (cfg.embeddings_manifest.empty() && !cfg.embeddings.empty()) {
    cfg.embeddings_manifest = default_manifest_path(cfg.embeddings);
  }
  cfg.train.validate();
  const Corpus corpus = load_corpus_dir(cfg.corpus);
  const EmbeddingStore emb = load_embedding_files(cfg.embeddings, cfg.embeddings_manifest);
  emb.check_covers(corpus);
  const ModelConfig model = resolve_model(cfg, corpus, emb);
  cfg.dim_u = model.dim_u;
  cfg.num_classes = model.num_classes;

  fs::create_directories(cfg.out_dir);
  const fs::path last = cfg.out_dir / "last.ckpt";

  TrainState state;
  if (opts.resume) {
    require_file(last, "resume state");
    ResumeState resumed = load_train_state(last);
    TrainConfig stored = resumed.config;
    stored.epochs = cfg.train.epochs;
    if (!(stored == cfg.train)) {
      throw UsageError("resume: training settings differ from " + last.string() +
                       " (only epochs may change)");
    }
    if (!(resumed.state.params.config == model)) {
      throw UsageError("resume: model dimensions differ from " + last.string());
    }
    state = std::move(resumed.state);
    if (!opts.quiet) out << "resuming at epoch " << state.next_epoch << "\n";
  } else {
    state = initial_state(model, cfg.train);
  }
  write_text(cfg.out_dir / "config.json", run_config_to_json(cfg));

  train_epochs(state, corpus, emb, cfg.train, [&](const TrainState& s) {
    const EpochRecord& r = s.history.epochs.back();
    if (!opts.quiet) {
      out << "epoch " << std::setw(3) << r.epoch + 1 << "/" << cfg.train.epochs << "  loss "
          << std::fixed << std::setprecision(6) << r.train_loss << "  dev wF1 "
          << std::setprecision(4) << r.dev_weighted_f1;
      if (r.train_weighted_f1) out << "  train wF1 " << *r.train_weighted_f1;
      out << std::defaultfloat << "\n";
    }
    save_train_state(last, s, cfg.train);
    write_text(cfg.out_dir / "history.json", history_to_json(s.history) + "\n");
  });

  save_checkpoint(cfg.out_dir / "best.ckpt", state.best_params, cfg.train.seed);
  write_text(cfg.out_dir / "history.json", history_to_json(state.history) + "\n");

  const MetricsReport dev = evaluate(state.best_params, corpus.dev, emb);
  write_report(cfg.out_dir / "dev_report", dev, corpus.label_names);
  if (!opts.quiet) {
    out << "best epoch " << state.history.best_epoch + 1 << "\n\ndev\n"
        << format_report(dev, corpus.label_names);
  }
  if (!corpus.test.empty()) {
    const MetricsReport test = evaluate(state.best_params, corpus.test, emb);
    write_report(cfg.out_dir / "test_report", test, corpus.label_names);
    if (!opts.quiet) out << "\ntest\n" << format_report(test, corpus.label_names);
  }
  return kOk;
}

int cmd_eval(const EvalOptions& opts, std::ostream& out) {
  require_file(opts.checkpoint, "checkpoint");
  const Checkpoint ck = load_checkpoint(opts.checkpoint);
  const Corpus corpus = load_corpus_dir(opts.corpus);
  const EmbeddingStore emb = load_embedding_files(opts.embeddings, opts.embeddings_manifest);
  check_compatible(ck.params.config, corpus, emb);
  const std::vector<Dialogue> dialogues = select_split(corpus, opts.split);
  const MetricsReport report =
      evaluate(ck.params, dialogues, emb, opts.edgeless ? GraphMode::kEdgeless : GraphMode::kDiscourse);
  out << format_report(report, corpus.label_names);
  fs::path stem = opts.report;
  if (stem.empty()) {
    stem = opts.checkpoint.parent_path() / (opts.split + (opts.edgeless ? "_edgeless" : "") + "_eval");
  }
  write_report(stem, report, corpus.label_names);
  return kOk;
}

int cmd_predict(const PredictOptions& opts, std::ostream& out) {
  require_file(opts.checkpoint, "checkpoint");
  const Checkpoint ck = load_checkpoint(opts.checkpoint);
  const Corpus corpus = load_corpus_dir(opts.corpus);
  const EmbeddingStore emb = load_embedding_files(opts.embeddings, opts.embeddings_manifest);
  check_compatible(ck.params.config, corpus, emb);

  std::ostringstream lines;
  for (const Dialogue& d : select_split(corpus, opts.split)) {
    const std::vector<std::size_t> preds = predict(ck.params, emb.at(d.id), build_graph(d));
    json labels = json::array();
    for (std::size_t p : preds) labels.push_back(corpus.label_names.at(p));
    lines << json{{"id", d.id}, {"predictions", preds}, {"labels", labels}}.dump() << "\n";
  }
  if (opts.output.empty()) {
    out << lines.str();
  } else {
    write_text(opts.output, lines.str());
  }
  return kOk;
}

GradcheckResult run_gradcheck(const GradcheckOptions& opts) {
  const ModelConfig& cfg = opts.model;
  cfg.validate();
  const std::size_t n = opts.utterances;
  if (n < 2) throw UsageError("gradcheck needs at least 2 utterances");

  Rng rng(derive_seed(opts.seed, 0x96ad));
  ModelParams params = init_params(cfg, opts.seed);
  // Nonzero biases so every path carries gradient.
  for_each_parameter(params, [&](const std::string& name, Tensor& t) {
    if (name.ends_with("bias")) {
      for (double& v : t.data()) v += rng.uniform(-0.5, 0.5);
    }
  });

  Tensor embeddings(n, cfg.dim_u);
  for (double& v : embeddings.data()) v = rng.normal();
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = rng.below(cfg.num_classes);
  // Node 2 has two predecessors so the attention softmax is exercised; one
  // chain of length 3 crosses both layers.
  std::vector<std::pair<std::size_t, std::size_t>> edges = {{0, 2}, {1, 2}, {2, 3}};
  std::erase_if(edges, [&](const auto& e) { return e.second >= n; });
  const DiscourseGraph graph = build_graph(n, edges);

  GradcheckResult result;
  for_each_parameter(params, [&](const std::string& name, const Tensor&) {
    result.tensor_names.push_back(name);
  });

  const ad::Objective objective = [&](std::span<const Tensor> values, std::vector<Tensor>* grads) {
    ModelParams p = ModelParams::zeros(cfg);
    unflatten(values, p);
    ad::Tape tape;
    if (opts.fault_op) tape.inject_backward_fault(*opts.fault_op, opts.fault_scale);
    const BoundParams bound = bind(tape, p);
    const std::vector<ad::Var> logits = forward(tape, bound, embeddings, graph);
    const ad::Var total = dialogue_loss_sum(logits, labels);
    const ad::Var loss = ad::matmul(total, tape.constant(Tensor(1, 1, 1.0 / static_cast<double>(n))));
    if (grads) {
      tape.backward(loss);
      ModelParams g = ModelParams::zeros(cfg);
      accumulate_gradients(tape, bound, g);
      *grads = flatten(g);
    }
    return loss.scalar();
  };
  result.report = ad::grad_check(objective, flatten(params), opts.eps);
  result.pass = result.report.max_relative_error < opts.threshold;
  return result;
}

int cmd_gradcheck(const GradcheckOptions& opts, std::ostream& out) {
  const GradcheckResult r = run_gradcheck(opts);
  const auto& rep = r.report;
  out << "coordinates checked  " << rep.coordinates << "\n"
      << "max relative error   " << std::scientific << std::setprecision(6)
      << rep.max_relative_error << "\n"
      << "worst coordinate     " << r.tensor_names.at(rep.worst_tensor) << "[" << rep.worst_index
      << "] analytic " << rep.worst_analytic << " numeric " << rep.worst_numeric << "\n"
      << "threshold            " << opts.threshold << std::defaultfloat << "\n"
      << (r.pass ? "PASS" : "FAIL") << "\n";
  return r.pass ? kOk : kNumeric;
}

int cmd_graph_stats(const GraphStatsOptions& opts, std::ostream& out) {
  const Corpus corpus = load_corpus_dir(opts.corpus);
  const std::vector<Dialogue> dialogues = select_split(corpus, opts.split);
  const GraphStatsSummary summary = summarize_graphs(dialogues);

  std::size_t id_width = 8;
  for (const auto& [id, _] : summary.dialogues) id_width = std::max(id_width, id.size());
  out << std::left << std::setw(static_cast<int>(id_width)) << "dialogue" << std::right
      << std::setw(6) << "n" << std::setw(8) << "edges" << std::setw(10) << "complete"
      << std::setw(10) << "density" << "\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& [id, s] : summary.dialogues) {
    out << std::left << std::setw(static_cast<int>(id_width)) << id << std::right << std::setw(6)
        << s.n << std::setw(8) << s.edges << std::setw(10) << s.complete_edges << std::setw(10)
        << s.density << "\n";
  }
  out << "\ndialogues        " << summary.dialogues.size() << "\n"
      << "mean edges       " << summary.mean_edges << "\n"
      << "mean complete    " << summary.mean_complete_edges << "\n"
      << "mean density     " << summary.mean_density << "\n"
      << "median density   " << summary.median_density << std::defaultfloat << "\n";

  if (!opts.json.empty()) {
    json rows = json::array();
    for (const auto& [id, s] : summary.dialogues) {
      rows.push_back({{"id", id},
                      {"n", s.n},
                      {"edges", s.edges},
                      {"complete_edges", s.complete_edges},
                      {"density", s.density}});
    }
    const json j = {{"split", opts.split},
                    {"dialogues", std::move(rows)},
                    {"mean_density", summary.mean_density},
                    {"median_density", summary.median_density},
                    {"mean_edges", summary.mean_edges},
                    {"mean_complete_edges", summary.mean_complete_edges}};
    write_text(opts.json, j.dump(2) + "\n");
  }
  return kOk;
}

int cmd_synth(const SynthOptions& opts, std::ostream& out) {
  if (opts.out_dir.empty()) throw UsageError("--out is required");
  const SyntheticData data = generate_synthetic(opts.config, opts.seed);
  fs::create_directories(opts.out_dir);
  save_corpus(opts.out_dir, data.corpus);
  save_embeddings(data.embeddings, opts.out_dir / "embeddings.bin", opts.out_dir / "embeddings.json");

  json projection = json::array();
  for (std::size_t r = 0; r < data.rule.projection.rows(); ++r) {
    const auto row = data.rule.projection.row(r);
    projection.push_back(std::vector<double>(row.begin(), row.end()));
  }
  const json rule = {{"task", task_name(opts.config.task)},
                     {"seed", opts.seed},
                     {"dim", opts.config.dim},
                     {"num_classes", opts.config.num_classes},
                     {"root_probability", opts.config.root_probability},
                     {"projection", std::move(projection)}};
  write_text(opts.out_dir / "rule.json", rule.dump(2) + "\n");

  out << "wrote " << data.corpus.dialogue_count() << " dialogues (" << data.embeddings.row_count()
      << " utterances, task " << task_name(opts.config.task) << ") to " << opts.out_dir.string()
      << "\n";
  return kOk;
}

int cmd_validate_manifest(const ManifestOptions& opts, std::ostream& out) {
  const Corpus corpus = load_corpus_dir(opts.corpus);
  ExpectedCounts expected;
  if (!opts.language.empty() && !opts.expected.empty()) {
    throw UsageError("give either --language or --expected, not both");
  }
  if (!opts.language.empty()) {
    auto known = mmeld_expected_counts(opts.language);
    if (!known) throw UsageError("unknown language '" + opts.language + "'");
    expected = *known;
  } else if (!opts.expected.empty()) {
    const json j = json::parse(read_text(opts.expected), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError("expected counts: invalid JSON");
    auto counts = [&](const char* key) -> std::optional<SplitCounts> {
      if (!j.contains(key)) return std::nullopt;
      const json& c = j[key];
      return SplitCounts{c.at("train").get<std::size_t>(), c.at("dev").get<std::size_t>(),
                         c.at("test").get<std::size_t>()};
    };
    expected.dialogues = counts("dialogues");
    expected.utterances = counts("utterances");
  }
  const ManifestReport report = validate_manifest(corpus, expected);
  out << format_manifest_report(report, corpus.label_names);
  return report.pass ? kOk : kInvalid;
}

}  // namespace disclstm::app
