#include <filesystem>
#include <fstream>
#include <iterator>

#include <CLI11.hpp>
#include <json.hpp>

#include "app.hpp"
#include "disclstm/error.hpp"

namespace disclstm::app {

namespace {

struct RunFlags {
  std::string config;
  std::optional<std::string> corpus, embeddings, manifest, out_dir;
  std::optional<std::size_t> dim_u, dim_g, dim_h, layers, num_classes;
  std::optional<std::size_t> batch_size, epochs;
  std::optional<double> lr, beta1, beta2, adam_eps, grad_clip;
  std::optional<bool> class_weighted, track_train_f1;
  std::optional<std::uint64_t> seed;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "JSON run config; flags override it");
  cmd->add_option("--corpus", f.corpus, "Corpus directory (train/dev/test.jsonl)");
  cmd->add_option("--embeddings", f.embeddings, "Embedding blob (.bin)");
  cmd->add_option("--embeddings-manifest", f.manifest, "Embedding manifest (default: <bin>.json)");
  cmd->add_option("--out", f.out_dir, "Output directory");
  cmd->add_option("--dim-u", f.dim_u, "Embedding width (default: from embeddings)");
  cmd->add_option("--dim-g", f.dim_g, "Graph state width");
  cmd->add_option("--dim-h", f.dim_h, "Cell hidden width");
  cmd->add_option("--layers", f.layers, "Attention layers");
  cmd->add_option("--classes", f.num_classes, "Class count (default: from corpus)");
  cmd->add_option("--batch-size", f.batch_size, "Dialogues per step");
  cmd->add_option("--epochs", f.epochs);
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--beta1", f.beta1);
  cmd->add_option("--beta2", f.beta2);
  cmd->add_option("--adam-eps", f.adam_eps);
  cmd->add_option("--grad-clip", f.grad_clip, "Global gradient norm limit");
  cmd->add_option("--class-weighted", f.class_weighted, "Inverse-frequency loss weights");
  cmd->add_option("--track-train-f1", f.track_train_f1, "Record train weighted-F1 per epoch");
  cmd->add_option("--seed", f.seed);
}

RunConfig resolve(const RunFlags& f) {
  RunConfig cfg;
  if (!f.config.empty()) {
    std::ifstream in(f.config, std::ios::binary);
    if (!in) throw FormatError("cannot open config " + f.config);
    cfg = run_config_from_json({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
  }
  if (f.corpus) cfg.corpus = *f.corpus;
  if (f.embeddings) cfg.embeddings = *f.embeddings;
  if (f.manifest) cfg.embeddings_manifest = *f.manifest;
  if (f.out_dir) cfg.out_dir = *f.out_dir;
  if (f.dim_u) cfg.dim_u = *f.dim_u;
  if (f.dim_g) cfg.dim_g = *f.dim_g;
  if (f.dim_h) cfg.dim_h = *f.dim_h;
  if (f.layers) cfg.layers = *f.layers;
  if (f.num_classes) cfg.num_classes = *f.num_classes;
  TrainConfig& t = cfg.train;
  if (f.batch_size) t.batch_size = *f.batch_size;
  if (f.epochs) t.epochs = *f.epochs;
  if (f.lr) t.learning_rate = *f.lr;
  if (f.beta1) t.beta1 = *f.beta1;
  if (f.beta2) t.beta2 = *f.beta2;
  if (f.adam_eps) t.adam_eps = *f.adam_eps;
  if (f.grad_clip) t.grad_clip_norm = *f.grad_clip;
  if (f.class_weighted) t.class_weighted = *f.class_weighted;
  if (f.track_train_f1) t.track_train_f1 = *f.track_train_f1;
  if (f.seed) t.seed = *f.seed;
  return cfg;
}

ad::Op parse_op(const std::string& name) {
  for (auto op : {ad::Op::kMatmul, ad::Op::kAdd, ad::Op::kConcat, ad::Op::kHadamard,
                  ad::Op::kSigmoid, ad::Op::kTanh, ad::Op::kMean, ad::Op::kRow,
                  ad::Op::kSoftmaxMasked, ad::Op::kCrossEntropy}) {
    if (name == ad::op_name(op)) return op;
  }
  throw UsageError("unknown op '" + name + "'");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"DiscLSTM: discourse-graph attention + bidirectional LSTM for emotion recognition"};
  app.require_subcommand(1);

  TrainOptions train_opts;
  RunFlags run_flags;
  auto* train = app.add_subcommand("train", "Train a model and write checkpoints and reports");
  add_run_flags(train, run_flags);
  train->add_flag("--resume", train_opts.resume, "Continue from <out>/last.ckpt");
  train->add_flag("--quiet", train_opts.quiet, "No per-epoch output");

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on one split");
  eval->add_option("--checkpoint", eval_opts.checkpoint)->required();
  eval->add_option("--corpus", eval_opts.corpus)->required();
  eval->add_option("--embeddings", eval_opts.embeddings)->required();
  eval->add_option("--embeddings-manifest", eval_opts.embeddings_manifest);
  eval->add_option("--split", eval_opts.split, "train, dev, test or all")->capture_default_str();
  eval->add_flag("--edgeless", eval_opts.edgeless, "Drop every discourse edge");
  eval->add_option("--report", eval_opts.report, "Report path stem (writes .json and .txt)");

  PredictOptions pred_opts;
  auto* pred = app.add_subcommand("predict", "Write per-utterance predictions as JSONL");
  pred->add_option("--checkpoint", pred_opts.checkpoint)->required();
  pred->add_option("--corpus", pred_opts.corpus)->required();
  pred->add_option("--embeddings", pred_opts.embeddings)->required();
  pred->add_option("--embeddings-manifest", pred_opts.embeddings_manifest);
  pred->add_option("--split", pred_opts.split)->capture_default_str();
  pred->add_option("--output", pred_opts.output, "Output file (default: stdout)");

  GradcheckOptions gc_opts;
  std::string fault_op;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
  gc->add_option("--dim-u", gc_opts.model.dim_u)->capture_default_str();
  gc->add_option("--dim-g", gc_opts.model.dim_g)->capture_default_str();
  gc->add_option("--dim-h", gc_opts.model.dim_h)->capture_default_str();
  gc->add_option("--layers", gc_opts.model.layers)->capture_default_str();
  gc->add_option("--classes", gc_opts.model.num_classes)->capture_default_str();
  gc->add_option("--utterances", gc_opts.utterances)->capture_default_str();
  gc->add_option("--seed", gc_opts.seed)->capture_default_str();
  gc->add_option("--eps", gc_opts.eps)->capture_default_str();
  gc->add_option("--threshold", gc_opts.threshold)->capture_default_str();
  gc->add_option("--fault-op", fault_op)->group("");
  gc->add_option("--fault-scale", gc_opts.fault_scale)->group("");

  GraphStatsOptions gs_opts;
  auto* gs = app.add_subcommand("graph-stats", "Edge counts and densities of the discourse graphs");
  gs->add_option("--corpus", gs_opts.corpus)->required();
  gs->add_option("--split", gs_opts.split)->capture_default_str();
  gs->add_option("--json", gs_opts.json, "Also write the table as JSON");

  SynthOptions syn_opts;
  std::string task = "local";
  auto* syn = app.add_subcommand("synth", "Generate a synthetic corpus with embeddings");
  syn->add_option("--task", task, "local or discourse")->capture_default_str();
  syn->add_option("--dialogues", syn_opts.config.n_dialogues, "Train dialogues")->capture_default_str();
  syn->add_option("--dev", syn_opts.config.dev_dialogues)->capture_default_str();
  syn->add_option("--test", syn_opts.config.test_dialogues)->capture_default_str();
  syn->add_option("--len-min", syn_opts.config.len_min)->capture_default_str();
  syn->add_option("--len-max", syn_opts.config.len_max)->capture_default_str();
  syn->add_option("--dim", syn_opts.config.dim)->capture_default_str();
  syn->add_option("--classes", syn_opts.config.num_classes)->capture_default_str();
  syn->add_option("--root-prob", syn_opts.config.root_probability)->capture_default_str();
  syn->add_option("--seed", syn_opts.seed)->capture_default_str();
  syn->add_option("--out", syn_opts.out_dir)->required();

  ManifestOptions man_opts;
  auto* man = app.add_subcommand("validate-manifest", "Check split and utterance counts");
  man->add_option("--corpus", man_opts.corpus)->required();
  man->add_option("--language", man_opts.language, "french, greek, spanish or polish");
  man->add_option("--expected", man_opts.expected, "JSON with dialogues/utterances per split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*train) {
      train_opts.run = resolve(run_flags);
      return cmd_train(train_opts, out);
    }
    if (*eval) return cmd_eval(eval_opts, out);
    if (*pred) return cmd_predict(pred_opts, out);
    if (*gc) {
      if (!fault_op.empty()) gc_opts.fault_op = parse_op(fault_op);
      return cmd_gradcheck(gc_opts, out);
    }
    if (*gs) return cmd_graph_stats(gs_opts, out);
    if (*syn) {
      syn_opts.config.task = parse_task(task);
      return cmd_synth(syn_opts, out);
    }
    if (*man) return cmd_validate_manifest(man_opts, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kInvalid;
}

}  // namespace disclstm::app
