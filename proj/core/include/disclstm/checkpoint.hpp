#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "disclstm/model.hpp"
#include "disclstm/training.hpp"

namespace disclstm {

// Structured-text forms of the configuration records. The *_from_json
// readers start from `base` and override only the keys present, so config
// files can be partial.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(std::string_view text, ModelConfig base = {});
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(std::string_view text, TrainConfig base = {});
std::string history_to_json(const TrainHistory& history);
TrainHistory history_from_json(std::string_view text);

// Checkpoint files: one line of JSON header (format, config, seed, tensor
// names and shapes, blob size) terminated by '\n', followed by every tensor
// as little-endian float64 in the declared order.

struct Checkpoint {
  ModelParams params;
  std::uint64_t seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     std::uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Full training state (current and best parameters, Adam moments, history,
/// next epoch) plus the TrainConfig that produced it.
struct ResumeState {
  TrainState state;
  TrainConfig config;
};

void save_train_state(const std::filesystem::path& path, const TrainState& state,
                      const TrainConfig& cfg);
ResumeState load_train_state(const std::filesystem::path& path);

}  // namespace disclstm
