#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "app.hpp"
#include "disclstm/checkpoint.hpp"
#include "disclstm/corpus.hpp"
#include "disclstm/embeddings.hpp"
#include "helpers.hpp"

using namespace disclstm;
using disclstm::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "disclstm");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Invocation r;
  r.code = app::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Synthetic corpus with train/dev/test under dir/data.
fs::path make_data(const TempDir& dir, const std::string& classes = "3") {
  const fs::path data = dir / "data";
  const Invocation r = invoke({"synth", "--task", "discourse", "--dialogues", "8", "--dev", "3",
                               "--test", "3", "--dim", "6", "--classes", classes, "--seed", "5",
                               "--out", data.string()});
  REQUIRE(r.code == 0);
  return data;
}

std::vector<std::string> train_args(const fs::path& data, const fs::path& out) {
  return {"train", "--corpus", data.string(), "--embeddings", (data / "embeddings.bin").string(),
          "--out", out.string(), "--dim-g", "4", "--dim-h", "3", "--epochs", "3",
          "--batch-size", "4", "--lr", "0.01", "--seed", "2", "--quiet"};
}

}  // namespace

TEST_CASE("cli: help and unknown subcommand") {
  CHECK(invoke({"--help"}).code == 0);
  CHECK(invoke({"frobnicate"}).code == 1);
  CHECK(invoke({}).code == 1);
}

TEST_CASE("cli: train writes its outputs and reruns are bit-identical") {
  TempDir dir("cli_train");
  const fs::path data = make_data(dir);

  const Invocation a = invoke(train_args(data, dir / "run_a"));
  REQUIRE_MESSAGE(a.code == 0, a.err);
  for (const char* name : {"config.json", "best.ckpt", "last.ckpt", "history.json", "dev_report.json",
                           "dev_report.txt", "test_report.json", "test_report.txt"}) {
    CHECK_MESSAGE(fs::exists(dir / "run_a" / name), name);
  }
  REQUIRE(invoke(train_args(data, dir / "run_b")).code == 0);
  for (const char* name : {"best.ckpt", "last.ckpt", "history.json"}) {
    CHECK(slurp(dir / "run_a" / name) == slurp(dir / "run_b" / name));
  }

  SUBCASE("eval reproduces the dev score and is repeatable") {
    const std::vector<std::string> args = {"eval", "--checkpoint", (dir / "run_a" / "best.ckpt").string(),
                                           "--corpus", data.string(), "--embeddings",
                                           (data / "embeddings.bin").string(), "--split", "dev"};
    const Invocation e1 = invoke(args);
    const Invocation e2 = invoke(args);
    REQUIRE_MESSAGE(e1.code == 0, e1.err);
    CHECK(e1.out == e2.out);
    CHECK(slurp(dir / "run_a" / "dev_eval.json") == slurp(dir / "run_a" / "dev_report.json"));

    const Invocation edgeless = invoke([&] {
      auto v = args;
      v.push_back("--edgeless");
      return v;
    }());
    CHECK(edgeless.code == 0);
    CHECK(fs::exists(dir / "run_a" / "dev_edgeless_eval.json"));
  }

  SUBCASE("eval rejects a checkpoint with a different class count") {
    TempDir other("cli_other");
    const fs::path data4 = make_data(other, "4");
    const Invocation e = invoke({"eval", "--checkpoint", (dir / "run_a" / "best.ckpt").string(),
                                 "--corpus", data4.string(), "--embeddings",
                                 (data4 / "embeddings.bin").string()});
    CHECK(e.code == 1);
    CHECK(e.err.find("class count mismatch") != std::string::npos);
  }

  SUBCASE("predict emits one line per dialogue") {
    const Invocation p = invoke({"predict", "--checkpoint", (dir / "run_a" / "best.ckpt").string(),
                                 "--corpus", data.string(), "--embeddings",
                                 (data / "embeddings.bin").string(), "--split", "test"});
    REQUIRE(p.code == 0);
    std::istringstream lines(p.out);
    std::string line;
    std::size_t count = 0;
    while (std::getline(lines, line)) {
      CHECK(line.find("\"predictions\"") != std::string::npos);
      ++count;
    }
    CHECK(count == 3);
  }

  SUBCASE("resume continues to a longer schedule") {
    auto args = train_args(data, dir / "run_a");
    args[std::find(args.begin(), args.end(), "--epochs") - args.begin() + 1] = "5";
    args.push_back("--resume");
    REQUIRE(invoke(args).code == 0);
    const TrainHistory h = history_from_json(slurp(dir / "run_a" / "history.json"));
    CHECK(h.epochs.size() == 5);
  }
}

TEST_CASE("cli: train reports missing inputs with exit code 1") {
  TempDir dir("cli_missing");
  const fs::path data = make_data(dir);
  const fs::path missing = dir / "nowhere" / "emb.bin";
  const Invocation r = invoke({"train", "--corpus", data.string(), "--embeddings", missing.string(),
                               "--out", (dir / "out").string(), "--quiet"});
  CHECK(r.code == 1);
  CHECK(r.err.find(missing.string()) != std::string::npos);

  const Invocation no_corpus = invoke({"train", "--corpus", (dir / "nope").string(), "--embeddings",
                                       (data / "embeddings.bin").string(), "--out",
                                       (dir / "out").string(), "--quiet"});
  CHECK(no_corpus.code == 1);
}

TEST_CASE("cli: config file with flag overrides") {
  TempDir dir("cli_config");
  const fs::path data = make_data(dir);
  {
    std::ofstream cfg(dir / "run.json");
    cfg << R"({"corpus": ")" << data.string() << R"(", "embeddings": ")"
        << (data / "embeddings.bin").string() << R"(", "model": {"dim_g": 4, "dim_h": 3},)"
        << R"( "train": {"epochs": 7, "batch_size": 4}})";
  }
  const Invocation r = invoke({"train", "--config", (dir / "run.json").string(), "--epochs", "2",
                               "--out", (dir / "out").string(), "--quiet"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const app::RunConfig written = app::run_config_from_json(slurp(dir / "out" / "config.json"));
  CHECK(written.train.epochs == 2);
  CHECK(written.train.batch_size == 4);
  CHECK(written.dim_g == 4);
  CHECK(written.dim_u == 6);
}

TEST_CASE("cli: gradcheck is deterministic and fails under an injected fault") {
  const Invocation a = invoke({"gradcheck", "--seed", "1"});
  const Invocation b = invoke({"gradcheck", "--seed", "1"});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("PASS") != std::string::npos);

  const Invocation bad = invoke({"gradcheck", "--fault-op", "tanh", "--fault-scale", "1.5"});
  CHECK(bad.code == 2);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}

TEST_CASE("cli: graph-stats on a hand-built corpus") {
  TempDir dir("cli_graph");
  Corpus corpus;
  corpus.num_classes = 2;
  corpus.label_names = {"a", "b"};
  Dialogue d;
  d.id = "third";
  for (std::size_t i = 0; i < 3; ++i) d.utterances.push_back({i, "s", std::nullopt, 0});
  d.edges = {{0, 1, std::nullopt}};
  corpus.train.push_back(d);
  save_corpus(dir / "c", corpus);

  const Invocation r = invoke({"graph-stats", "--corpus", (dir / "c").string(), "--json",
                               (dir / "stats.json").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("third") != std::string::npos);
  CHECK(r.out.find("0.3333") != std::string::npos);
  CHECK(fs::exists(dir / "stats.json"));
}

TEST_CASE("cli: synth output reloads and validates") {
  TempDir dir("cli_synth");
  const fs::path data = make_data(dir);
  const Corpus corpus = load_corpus(data);
  const EmbeddingStore emb = load_embeddings(data / "embeddings.bin", data / "embeddings.json");
  CHECK(corpus.train.size() == 8);
  CHECK_NOTHROW(emb.check_covers(corpus));
  CHECK(fs::exists(data / "rule.json"));

  {
    std::ofstream exp(dir / "expected.json");
    exp << R"({"dialogues": {"train": 8, "dev": 3, "test": 3}})";
  }
  const Invocation ok = invoke({"validate-manifest", "--corpus", data.string(), "--expected",
                                (dir / "expected.json").string()});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("result: PASS") != std::string::npos);

  {
    std::ofstream exp(dir / "expected.json");
    exp << R"({"dialogues": {"train": 9, "dev": 3, "test": 3}})";
  }
  const Invocation bad = invoke({"validate-manifest", "--corpus", data.string(), "--expected",
                                 (dir / "expected.json").string()});
  CHECK(bad.code == 1);
  CHECK(bad.out.find("result: FAIL") != std::string::npos);
  CHECK(invoke({"validate-manifest", "--corpus", data.string(), "--language", "klingon"}).code == 1);
}
