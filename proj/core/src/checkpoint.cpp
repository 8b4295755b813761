#include "disclstm/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "disclstm/error.hpp"

namespace disclstm {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "disclstm-checkpoint";
constexpr int kVersion = 1;

json parse_or_throw(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

json model_config_json(const ModelConfig& c) {
  return {{"dim_u", c.dim_u},
          {"dim_g", c.dim_g},
          {"dim_h", c.dim_h},
          {"layers", c.layers},
          {"num_classes", c.num_classes}};
}

ModelConfig model_config_from(const json& j, ModelConfig base) {
  if (!j.is_object()) throw FormatError("model config must be an object");
  for (auto& [key, field] : {std::pair{"dim_u", &base.dim_u}, std::pair{"dim_g", &base.dim_g},
                             std::pair{"dim_h", &base.dim_h}, std::pair{"layers", &base.layers},
                             std::pair{"num_classes", &base.num_classes}}) {
    if (j.contains(key)) *field = j[key].get<std::size_t>();
  }
  return base;
}

json train_config_json(const TrainConfig& c) {
  json j = {{"batch_size", c.batch_size},   {"epochs", c.epochs},
            {"learning_rate", c.learning_rate}, {"beta1", c.beta1},
            {"beta2", c.beta2},             {"adam_eps", c.adam_eps}};
  j["grad_clip_norm"] = c.grad_clip_norm ? json(*c.grad_clip_norm) : json(nullptr);
  j["class_weighted"] = c.class_weighted;
  j["track_train_f1"] = c.track_train_f1;
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_from(const json& j, TrainConfig c) {
  if (!j.is_object()) throw FormatError("train config must be an object");
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("beta1")) c.beta1 = j["beta1"].get<double>();
  if (j.contains("beta2")) c.beta2 = j["beta2"].get<double>();
  if (j.contains("adam_eps")) c.adam_eps = j["adam_eps"].get<double>();
  if (j.contains("grad_clip_norm")) {
    c.grad_clip_norm = j["grad_clip_norm"].is_null()
                           ? std::nullopt
                           : std::optional<double>(j["grad_clip_norm"].get<double>());
  }
  if (j.contains("class_weighted")) c.class_weighted = j["class_weighted"].get<bool>();
  if (j.contains("track_train_f1")) c.track_train_f1 = j["track_train_f1"].get<bool>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  return c;
}

json history_json(const TrainHistory& h) {
  json epochs = json::array();
  for (const EpochRecord& r : h.epochs) {
    json e = {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"dev_weighted_f1", r.dev_weighted_f1}};
    if (r.train_weighted_f1) e["train_weighted_f1"] = *r.train_weighted_f1;
    epochs.push_back(std::move(e));
  }
  return {{"best_epoch", h.best_epoch},
          {"best_dev_weighted_f1", h.best_dev_weighted_f1},
          {"epochs", std::move(epochs)}};
}

TrainHistory history_from(const json& j) {
  TrainHistory h;
  h.best_epoch = j.at("best_epoch").get<std::size_t>();
  h.best_dev_weighted_f1 = j.at("best_dev_weighted_f1").get<double>();
  for (const json& e : j.at("epochs")) {
    EpochRecord r;
    r.epoch = e.at("epoch").get<std::size_t>();
    r.train_loss = e.at("train_loss").get<double>();
    r.dev_weighted_f1 = e.at("dev_weighted_f1").get<double>();
    if (e.contains("train_weighted_f1")) r.train_weighted_f1 = e["train_weighted_f1"].get<double>();
    h.epochs.push_back(r);
  }
  return h;
}

struct NamedTensor {
  std::string name;
  const Tensor* tensor;
};

void append_params(std::vector<NamedTensor>& out, const std::string& prefix, const ModelParams& p) {
  for_each_parameter(p, [&](const std::string& name, const Tensor& t) {
    out.push_back({prefix + name, &t});
  });
}

void write_file(const std::filesystem::path& path, json header,
                const std::vector<NamedTensor>& tensors) {
  std::size_t values = 0;
  json listing = json::array();
  for (const NamedTensor& nt : tensors) {
    listing.push_back({{"name", nt.name}, {"shape", {nt.tensor->rows(), nt.tensor->cols()}}});
    values += nt.tensor->size();
  }
  header["tensors"] = std::move(listing);
  header["blob_bytes"] = values * 8;

  std::vector<unsigned char> blob;
  blob.reserve(values * 8);
  for (const NamedTensor& nt : tensors) {
    for (double v : nt.tensor->data()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) blob.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    }
  }

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw FormatError("write failed for checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

struct RawFile {
  json header;
  std::vector<unsigned char> blob;
  std::size_t cursor = 0;
};

RawFile read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing checkpoint header");
  RawFile raw;
  raw.header = parse_or_throw(line, "checkpoint header");
  if (raw.header.value("format", std::string()) != kFormat) {
    throw FormatError(path.string() + ": not a disclstm checkpoint");
  }
  if (raw.header.value("version", 0) != kVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version");
  }
  raw.blob.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  if (raw.blob.size() != raw.header.at("blob_bytes").get<std::size_t>()) {
    throw FormatError(path.string() + ": size mismatch in checkpoint blob");
  }
  return raw;
}

void read_params(RawFile& raw, std::size_t& listing_index, const std::string& prefix,
                 ModelParams& into) {
  const json& listing = raw.header.at("tensors");
  for_each_parameter(into, [&](const std::string& name, Tensor& t) {
    if (listing_index >= listing.size()) throw FormatError("checkpoint is missing " + prefix + name);
    const json& entry = listing[listing_index++];
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (entry.at("name").get<std::string>() != prefix + name || shape.size() != 2 ||
        shape[0] != t.rows() || shape[1] != t.cols()) {
      throw FormatError("checkpoint tensor " + entry.at("name").get<std::string>() +
                        " does not match expected " + prefix + name + " " + t.shape_string());
    }
    for (double& v : t.data()) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(raw.blob[raw.cursor++]) << (8 * b);
      }
      v = std::bit_cast<double>(bits);
    }
  });
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return model_config_json(cfg).dump(); }

ModelConfig model_config_from_json(std::string_view text, ModelConfig base) {
  return model_config_from(parse_or_throw(text, "model config"), base);
}

std::string train_config_to_json(const TrainConfig& cfg) { return train_config_json(cfg).dump(); }

TrainConfig train_config_from_json(std::string_view text, TrainConfig base) {
  return train_config_from(parse_or_throw(text, "train config"), base);
}

std::string history_to_json(const TrainHistory& history) { return history_json(history).dump(2); }

TrainHistory history_from_json(std::string_view text) {
  return history_from(parse_or_throw(text, "history"));
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     std::uint64_t seed) {
  json header = {{"format", kFormat}, {"version", kVersion}, {"kind", "model"},
                 {"seed", seed},      {"config", model_config_json(params.config)}};
  std::vector<NamedTensor> tensors;
  append_params(tensors, "", params);
  write_file(path, std::move(header), tensors);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  RawFile raw = read_file(path);
  Checkpoint ck;
  ck.seed = raw.header.at("seed").get<std::uint64_t>();
  const ModelConfig cfg = model_config_from(raw.header.at("config"), ModelConfig{});
  ck.params = ModelParams::zeros(cfg);
  std::size_t index = 0;
  const std::string prefix = raw.header.value("kind", std::string()) == "train-state" ? "best/" : "";
  if (!prefix.empty()) {
    // A train-state file also serves as a model checkpoint (its best params).
    ModelParams skip = ModelParams::zeros(cfg);
    read_params(raw, index, "params/", skip);
  }
  read_params(raw, index, prefix, ck.params);
  return ck;
}

void save_train_state(const std::filesystem::path& path, const TrainState& state,
                      const TrainConfig& cfg) {
  json header = {{"format", kFormat},
                 {"version", kVersion},
                 {"kind", "train-state"},
                 {"seed", cfg.seed},
                 {"config", model_config_json(state.params.config)},
                 {"train_config", train_config_json(cfg)},
                 {"history", history_json(state.history)},
                 {"adam_step", state.adam.step},
                 {"next_epoch", state.next_epoch}};
  std::vector<NamedTensor> tensors;
  append_params(tensors, "params/", state.params);
  append_params(tensors, "best/", state.best_params);
  std::size_t k = 0;
  for_each_parameter(state.params, [&](const std::string& name, const Tensor&) {
    tensors.push_back({"adam.m/" + name, &state.adam.m.at(k)});
    tensors.push_back({"adam.v/" + name, &state.adam.v.at(k)});
    ++k;
  });
  write_file(path, std::move(header), tensors);
}

ResumeState load_train_state(const std::filesystem::path& path) {
  RawFile raw = read_file(path);
  if (raw.header.value("kind", std::string()) != "train-state") {
    throw FormatError(path.string() + ": not a training-state checkpoint");
  }
  ResumeState r;
  r.config = train_config_from(raw.header.at("train_config"), TrainConfig{});
  const ModelConfig cfg = model_config_from(raw.header.at("config"), ModelConfig{});
  r.state.params = ModelParams::zeros(cfg);
  r.state.best_params = ModelParams::zeros(cfg);
  r.state.history = history_from(raw.header.at("history"));
  r.state.adam = AdamState::like(r.state.params);
  r.state.adam.step = raw.header.at("adam_step").get<std::uint64_t>();
  r.state.next_epoch = raw.header.at("next_epoch").get<std::size_t>();
  std::size_t index = 0;
  read_params(raw, index, "params/", r.state.params);
  read_params(raw, index, "best/", r.state.best_params);

  // Moments are interleaved per tensor: m then v.
  const json& listing = raw.header.at("tensors");
  for (std::size_t k = 0; k < r.state.adam.m.size(); ++k) {
    for (Tensor* t : {&r.state.adam.m[k], &r.state.adam.v[k]}) {
      if (index >= listing.size()) throw FormatError("train state is missing optimizer moments");
      const auto shape = listing[index++].at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2 || shape[0] != t->rows() || shape[1] != t->cols()) {
        throw FormatError("train state optimizer moment has the wrong shape");
      }
      for (double& v : t->data()) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
          bits |= static_cast<std::uint64_t>(raw.blob[raw.cursor++]) << (8 * b);
        }
        v = std::bit_cast<double>(bits);
      }
    }
  }
  if (raw.cursor != raw.blob.size()) throw FormatError(path.string() + ": trailing checkpoint data");
  return r;
}

}  // namespace disclstm
