#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gazemae/model.hpp"

namespace gazemae {

struct EpochMetrics {
  int epoch = 0;  // 1-based, epoch these metrics close out
  double train_loss = 0;
  std::optional<double> val_map;
  std::optional<double> val_acc;
  double lr = 0;
};

// Self-describing training state container: versioned magic header, JSON
// metadata (model config, epoch counters, RNG state, metric history, config
// echo), then raw little-endian float64 tensors for parameters and the two
// optimizer moments.
struct Checkpoint {
  ModelConfig model_config;
  std::vector<double> params;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t adam_steps = 0;
  int epoch = 0;  // completed epochs
  std::int64_t global_step = 0;
  std::uint64_t root_seed = 0;
  std::string rng_state;
  std::vector<EpochMetrics> history;
  std::string config_echo;  // resolved run config text
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<EpochMetrics>& history);

// Rebuild a model carrying the checkpointed parameters.
VideoMae model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace gazemae
