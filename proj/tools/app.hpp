#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "disclstm/autodiff.hpp"
#include "disclstm/model.hpp"
#include "disclstm/synthetic.hpp"
#include "disclstm/training.hpp"

namespace disclstm::app {

enum ExitCode : int {
  kOk = 0,
  kInvalid = 1,
  kNumeric = 2,
};

/// Fully resolved settings of a training run. Model dimensions left unset
/// are taken from the data (embedding width, corpus class count).
struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path embeddings;           // .bin
  std::filesystem::path embeddings_manifest;  // defaults to the .bin path with .json
  std::filesystem::path out_dir;
  std::optional<std::size_t> dim_u;
  std::size_t dim_g = 300;
  std::size_t dim_h = 300;
  std::size_t layers = 2;
  std::optional<std::size_t> num_classes;
  TrainConfig train;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string run_config_to_json(const RunConfig& cfg);
/// Overrides only the keys present in `text`.
RunConfig run_config_from_json(const std::string& text, RunConfig base = {});

std::filesystem::path default_manifest_path(const std::filesystem::path& bin);

struct TrainOptions {
  RunConfig run;
  bool resume = false;
  bool quiet = false;
};

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path corpus;
  std::filesystem::path embeddings;
  std::filesystem::path embeddings_manifest;
  std::string split = "test";
  bool edgeless = false;
  std::filesystem::path report;  // defaults next to the checkpoint
};

struct PredictOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path corpus;
  std::filesystem::path embeddings;
  std::filesystem::path embeddings_manifest;
  std::string split = "test";
  std::filesystem::path output;  // stdout when empty
};

struct GradcheckOptions {
  ModelConfig model{.dim_u = 8, .dim_g = 6, .dim_h = 4, .layers = 2, .num_classes = 3};
  std::size_t utterances = 4;
  std::uint64_t seed = 0;
  double eps = 1e-5;
  double threshold = 1e-4;
  std::optional<ad::Op> fault_op;
  double fault_scale = 1.0;
};

struct GradcheckResult {
  ad::GradCheckReport report;
  std::vector<std::string> tensor_names;
  bool pass = false;
};

struct GraphStatsOptions {
  std::filesystem::path corpus;
  std::string split = "all";
  std::filesystem::path json;
};

struct SynthOptions {
  SyntheticConfig config;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
};

struct ManifestOptions {
  std::filesystem::path corpus;
  std::string language;
  std::filesystem::path expected;
};

int cmd_train(const TrainOptions& opts, std::ostream& out);
int cmd_eval(const EvalOptions& opts, std::ostream& out);
int cmd_predict(const PredictOptions& opts, std::ostream& out);
GradcheckResult run_gradcheck(const GradcheckOptions& opts);
int cmd_gradcheck(const GradcheckOptions& opts, std::ostream& out);
int cmd_graph_stats(const GraphStatsOptions& opts, std::ostream& out);
int cmd_synth(const SynthOptions& opts, std::ostream& out);
int cmd_validate_manifest(const ManifestOptions& opts, std::ostream& out);

/// Parses argv, dispatches and maps exceptions to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace disclstm::app
