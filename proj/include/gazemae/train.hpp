#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gazemae/augment.hpp"
#include "gazemae/checkpoint.hpp"
#include "gazemae/model.hpp"
#include "gazemae/optim.hpp"
#include "gazemae/windowing.hpp"

namespace gazemae {

struct TrainSettings {
  SamplingSpec sampling;  // resolution + window geometry used to materialize
  AugmentPolicy augment;
  OptimizerSpec optim;
  ScheduleSpec schedule;  // steps_per_epoch is computed from the data
  int batch_size = 32;
  int accum_steps = 1;
  int workers = 1;
  // Stop after completing this many epochs (0 = run the full schedule).
  // Checkpoints still land, so a later run can resume the schedule.
  int stop_after_epochs = 0;
  std::uint64_t seed = 42;
  std::string config_echo;  // stored into checkpoints
  std::function<void(const EpochMetrics&)> on_epoch;  // optional progress hook

  void validate() const;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::vector<double> lr_trace;  // learning rate at every optimizer step of this run
  std::filesystem::path last_checkpoint;
  std::filesystem::path best_checkpoint;  // empty for pretraining
  int best_epoch = 0;
};

// Supervised fine-tuning: unweighted cross-entropy over augmented windows,
// per-epoch validation scoring, best-by-mAP + last checkpoints, resumable.
TrainResult finetune(VideoMae& model, const std::vector<WindowSample>& train_windows,
                     const std::vector<WindowSample>& val_windows, const FrameStore& store,
                     const TrainSettings& settings, const std::filesystem::path& out_dir,
                     const Checkpoint* resume = nullptr);

// Self-supervised masked reconstruction with a fresh tube mask per sample
// per epoch. No augmentation, no validation pass.
TrainResult pretrain_mae(VideoMae& model, const std::vector<WindowSample>& windows,
                         const FrameStore& store, const TrainSettings& settings,
                         const std::filesystem::path& out_dir,
                         const Checkpoint* resume = nullptr);

// Forward-only p(looking) scores, one per window, parallel over `workers`.
std::vector<double> predict_scores(const VideoMae& model,
                                   const std::vector<WindowSample>& windows,
                                   const FrameStore& store, const SamplingSpec& sampling,
                                   int workers);

// Per-window augmentation seed: (root seed, epoch, window identity).
std::uint64_t window_augment_seed(std::uint64_t seed, int epoch, const WindowSample& window);
std::uint64_t window_mask_seed(std::uint64_t seed, int epoch, const WindowSample& window);

}  // namespace gazemae
