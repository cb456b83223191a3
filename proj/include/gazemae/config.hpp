#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gazemae/augment.hpp"
#include "gazemae/model.hpp"
#include "gazemae/optim.hpp"
#include "gazemae/synth.hpp"
#include "gazemae/windowing.hpp"

namespace gazemae {

// Whole-run configuration, read from an INI-style key-value file with
// sections [data], [windowing], [augment], [model], [optim], [schedule].
// The fine-tuning recipe keys appear verbatim ("Learning rate schedule",
// "Weight decay", "Rand augment", ...). Unknown sections or keys are
// rejected.
struct RunConfig {
  // [data]
  std::string root = "runs/data";
  std::uint64_t seed = 42;
  int workers = 1;
  int n_clips = 1100;
  int frames_per_clip = 17;
  int raw_image_size = 64;
  double imbalance_ratio = 10.0;
  double motion_jitter_px = 1.0;
  double frame_label_flip_prob = 0.0;

  // [windowing]
  int resolution = 224;  // "Resolution"
  int stride_train = 13;
  int stride_val = 13;
  int stride_test = 1;
  int half_window = 3;

  // [augment]
  double scale_min = 0.08;  // "Scale"
  double scale_max = 1.00;
  double ratio_min = 0.75;  // "Jitter aspect ratio"
  double ratio_max = 1.33;
  double color_jitter = 0.4;                              // "Color jitter"
  std::string rand_augment = "rand-m7-n4-mstd0.5-inc1";  // "Rand augment"

  // [model]
  std::string variant = "toy";
  int patch_size = 16;
  int tubelet_size = 1;
  int embed_dim = 96;
  int depth = 4;
  int heads = 4;
  int decoder_dim = 48;
  int decoder_depth = 2;
  double mask_ratio = 0.9;
  std::array<double, 3> pixel_mean{0.485, 0.456, 0.406};
  std::array<double, 3> pixel_std{0.229, 0.224, 0.225};

  // [optim]
  std::string optimizer_name = "AdamW";  // "Optimizer"
  double beta1 = 0.9;                    // "Momentum"
  double beta2 = 0.999;
  double weight_decay = 0.05;  // "Weight decay"
  int batch_size = 32;         // "Batch size"
  int accum_steps = 1;

  // [schedule]
  std::string schedule_name = "cosine";  // "Learning rate schedule"
  double start_lr = 1e-6;                // "Start learning rate"
  double peak_lr = 5e-6;                 // "Learning rate"
  double end_lr = 1e-6;                  // "End learning rate"
  int warmup_epochs = 3;                 // "Warmup epoch"
  int epochs = 10;                       // "Epochs"

  // Derived module specs.
  SamplingSpec sampling(int stride) const;
  int stride_for_split(const std::string& split) const;
  AugmentPolicy augment_policy() const;
  ModelConfig model_config() const;
  SynthSpec synth_spec() const;
  OptimizerSpec optimizer_spec() const;
  ScheduleSpec schedule_spec() const;  // steps_per_epoch left at 1

  // Validates every sub-spec and the cross-field constraints; throws
  // ValidationError before any work starts.
  void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

// Applies one "section.key=value" override (the key may contain spaces).
void apply_override(RunConfig& config, const std::string& assignment);

// Canonical echo; parse_config_text(render_config(c)) reproduces c exactly.
std::string render_config(const RunConfig& config);
void write_config_echo(const std::filesystem::path& path, const RunConfig& config);

}  // namespace gazemae
