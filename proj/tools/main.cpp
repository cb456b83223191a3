#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "gazemae/checkpoint.hpp"
#include "gazemae/config.hpp"
#include "gazemae/errors.hpp"
#include "gazemae/eval.hpp"
#include "gazemae/pipeline.hpp"
#include "gazemae/synth.hpp"
#include "gazemae/train.hpp"

namespace fs = std::filesystem;
using namespace gazemae;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  int workers = 0;  // 0 = use config value
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "run config file (INI-style)");
  cmd->add_option("--set", opts.overrides, "override a config value, section.key=value");
  cmd->add_option("--workers", opts.workers, "parallel data/compute workers");
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig config;
  if (!opts.config_path.empty()) {
    config = parse_config_file(opts.config_path);
  }
  for (const auto& assignment : opts.overrides) {
    apply_override(config, assignment);
  }
  if (opts.workers > 0) config.workers = opts.workers;
  config.validate();
  return config;
}

TrainSettings make_settings(const RunConfig& config, int stride) {
  TrainSettings settings;
  settings.sampling = config.sampling(stride);
  settings.augment = config.augment_policy();
  settings.optim = config.optimizer_spec();
  settings.schedule = config.schedule_spec();
  settings.batch_size = config.batch_size;
  settings.accum_steps = config.accum_steps;
  settings.workers = config.workers;
  settings.seed = config.seed;
  settings.config_echo = render_config(config);
  settings.on_epoch = [](const EpochMetrics& m) {
    std::printf("epoch %d  train_loss %.6f", m.epoch, m.train_loss);
    if (m.val_map) {
      std::printf("  val_mAP %.4f", *m.val_map);
    } else if (m.val_acc) {
      std::printf("  val_mAP undefined");
    }
    if (m.val_acc) std::printf("  val_acc %.4f", *m.val_acc);
    std::printf("  lr %.3g\n", m.lr);
    std::fflush(stdout);
  };
  return settings;
}

void print_stats(const ClassBalanceReport& report) {
  nlohmann::ordered_json j;
  j["n_positive"] = report.n_positive;
  j["n_negative"] = report.n_negative;
  if (report.ratio_neg_to_pos) {
    j["ratio_neg_to_pos"] = *report.ratio_neg_to_pos;
  } else {
    j["ratio_neg_to_pos"] = nullptr;
  }
  j["n_clips"] = report.n_clips;
  j["n_tracks"] = report.n_tracks;

  std::printf("records:    %lld positive / %lld negative\n",
              static_cast<long long>(report.n_positive),
              static_cast<long long>(report.n_negative));
  if (report.ratio_neg_to_pos) {
    std::printf("neg:pos:    %.4f\n", *report.ratio_neg_to_pos);
  } else {
    std::printf("neg:pos:    undefined (no positives)\n");
  }
  std::printf("clips:      %lld\n", static_cast<long long>(report.n_clips));
  std::printf("tracks:     %lld\n", static_cast<long long>(report.n_tracks));
  std::printf("%s\n", j.dump().c_str());
}

// Window sampling derived from a checkpoint's model geometry, so prediction
// always matches the trained resolution and window length.
SamplingSpec checkpoint_sampling(const Checkpoint& ckpt, int stride) {
  SamplingSpec spec;
  spec.stride = stride;
  spec.half_window = (ckpt.model_config.frames - 1) / 2;
  spec.resolution = ckpt.model_config.image_size;
  return spec;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"gazemae: eye-contact classification over face-track windows"};
  app.require_subcommand(1);

  // synth -------------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic gaze dataset");
  CommonOpts synth_opts;
  std::string synth_out;
  add_common(synth_cmd, synth_opts);
  synth_cmd->add_option("--out", synth_out, "dataset root (default: data.root)");
  synth_cmd->callback([&]() {
    RunConfig config = resolve_config(synth_opts);
    if (!synth_out.empty()) config.root = synth_out;
    const auto manifest = generate_dataset(config.synth_spec(), config.root);
    write_config_echo(fs::path(config.root) / "resolved.cfg", config);
    std::printf("clips:      %d (%lld positive, %lld negative)\n", config.n_clips,
                static_cast<long long>(manifest.n_positive_clips),
                static_cast<long long>(manifest.n_negative_clips));
    std::printf("records:    %zu\n", manifest.records.size());
    std::printf("splits:     train %zu / val %zu / test %zu\n", manifest.train_clips.size(),
                manifest.val_clips.size(), manifest.test_clips.size());
    std::printf("root:       %s\n", config.root.c_str());
  });

  // stats -------------------------------------------------------------------
  auto* stats_cmd = app.add_subcommand("stats", "class balance of an annotation split");
  CommonOpts stats_opts;
  std::string stats_split = "train";
  add_common(stats_cmd, stats_opts);
  stats_cmd->add_option("--split", stats_split, "train|val|test|all (default train)");
  stats_cmd->callback([&]() {
    const RunConfig config = resolve_config(stats_opts);
    const DatasetLayout layout{config.root};
    const auto tracks = group_tracks(load_split_annotations(layout, stats_split));
    print_stats(dataset_stats(tracks));
  });

  // windows -----------------------------------------------------------------
  auto* windows_cmd = app.add_subcommand("windows", "emit the window manifest for a split");
  CommonOpts windows_opts;
  std::string windows_split = "test";
  std::string windows_out;
  int windows_stride = 0;
  add_common(windows_cmd, windows_opts);
  windows_cmd->add_option("--split", windows_split, "train|val|test (default test)");
  windows_cmd->add_option("--stride", windows_stride, "override the split's center stride");
  windows_cmd->add_option("--out", windows_out, "write manifest to a file instead of stdout");
  windows_cmd->callback([&]() {
    const RunConfig config = resolve_config(windows_opts);
    const int stride =
        windows_stride > 0 ? windows_stride : config.stride_for_split(windows_split);
    const DatasetLayout layout{config.root};
    const auto split = load_split_windows(layout, windows_split, config.sampling(stride));
    if (windows_out.empty()) {
      for (const auto& window : split.windows) {
        std::printf("%s\n", window_manifest_line(window).c_str());
      }
    } else {
      std::ofstream out(windows_out);
      if (!out) throw Error("cannot write manifest: " + windows_out);
      for (const auto& window : split.windows) {
        out << window_manifest_line(window) << '\n';
      }
      write_config_echo(windows_out + ".resolved.cfg", config);
      std::printf("windows:    %zu -> %s\n", split.windows.size(), windows_out.c_str());
    }
  });

  // pretrain ----------------------------------------------------------------
  auto* pretrain_cmd = app.add_subcommand("pretrain", "masked-reconstruction pretraining");
  CommonOpts pretrain_opts;
  std::string pretrain_out;
  std::string pretrain_resume;
  add_common(pretrain_cmd, pretrain_opts);
  pretrain_cmd->add_option("--out", pretrain_out, "run output directory")->required();
  pretrain_cmd->add_option("--resume", pretrain_resume, "checkpoint to resume from");
  pretrain_cmd->callback([&]() {
    const RunConfig config = resolve_config(pretrain_opts);
    const DatasetLayout layout{config.root};
    const auto split =
        load_split_windows(layout, "train", config.sampling(config.stride_train));
    const FrameStore store(layout.frames_root());
    VideoMae model(config.model_config(), config.seed);
    const TrainSettings settings = make_settings(config, config.stride_train);
    write_config_echo(fs::path(pretrain_out) / "resolved.cfg", config);
    std::optional<Checkpoint> resume;
    if (!pretrain_resume.empty()) resume = load_checkpoint(pretrain_resume);
    std::filesystem::create_directories(pretrain_out);
    const auto result = pretrain_mae(model, split.windows, store, settings, pretrain_out,
                                     resume ? &*resume : nullptr);
    std::printf("checkpoint: %s\n", result.last_checkpoint.string().c_str());
  });

  // finetune ----------------------------------------------------------------
  auto* finetune_cmd = app.add_subcommand("finetune", "supervised fine-tuning");
  CommonOpts finetune_opts;
  std::string finetune_out;
  std::string finetune_init;
  std::string finetune_resume;
  add_common(finetune_cmd, finetune_opts);
  finetune_cmd->add_option("--out", finetune_out, "run output directory")->required();
  finetune_cmd->add_option("--init", finetune_init,
                           "checkpoint providing initial weights (e.g. from pretrain)");
  finetune_cmd->add_option("--resume", finetune_resume, "checkpoint to resume from");
  finetune_cmd->callback([&]() {
    if (!finetune_init.empty() && !finetune_resume.empty()) {
      throw ValidationError("--init and --resume are mutually exclusive");
    }
    const RunConfig config = resolve_config(finetune_opts);
    const DatasetLayout layout{config.root};
    const auto train_split =
        load_split_windows(layout, "train", config.sampling(config.stride_train));
    const auto val_split = load_split_windows(layout, "val", config.sampling(config.stride_val));
    const FrameStore store(layout.frames_root());
    VideoMae model(config.model_config(), config.seed);
    if (!finetune_init.empty()) {
      const Checkpoint init = load_checkpoint(finetune_init);
      if (init.params.size() != model.params().size()) {
        throw ValidationError("--init checkpoint does not match the configured model");
      }
      model.params().values() = init.params;
    }
    const TrainSettings settings = make_settings(config, config.stride_train);
    std::filesystem::create_directories(finetune_out);
    write_config_echo(fs::path(finetune_out) / "resolved.cfg", config);
    std::optional<Checkpoint> resume;
    if (!finetune_resume.empty()) resume = load_checkpoint(finetune_resume);
    const auto result = finetune(model, train_split.windows, val_split.windows, store, settings,
                                 finetune_out, resume ? &*resume : nullptr);
    std::printf("last:       %s\n", result.last_checkpoint.string().c_str());
    if (!result.best_checkpoint.empty()) {
      std::printf("best:       %s (epoch %d)\n", result.best_checkpoint.string().c_str(),
                  result.best_epoch);
    }
  });

  // predict -----------------------------------------------------------------
  auto* predict_cmd = app.add_subcommand("predict", "score a split with a checkpoint");
  CommonOpts predict_opts;
  std::string predict_ckpt;
  std::string predict_split = "test";
  std::string predict_out;
  int predict_stride = 0;
  add_common(predict_cmd, predict_opts);
  predict_cmd->add_option("--checkpoint", predict_ckpt, "model checkpoint")->required();
  predict_cmd->add_option("--split", predict_split, "train|val|test (default test)");
  predict_cmd->add_option("--stride", predict_stride, "center stride (default stride_test)");
  predict_cmd->add_option("--out", predict_out, "prediction CSV path")->required();
  predict_cmd->callback([&]() {
    const RunConfig config = resolve_config(predict_opts);
    const Checkpoint ckpt = load_checkpoint(predict_ckpt);
    const VideoMae model = model_from_checkpoint(ckpt);
    const int stride = predict_stride > 0 ? predict_stride : config.stride_test;
    const DatasetLayout layout{config.root};
    const auto split =
        load_split_windows(layout, predict_split, checkpoint_sampling(ckpt, stride));
    const FrameStore store(layout.frames_root());
    const auto scores = predict_scores(model, split.windows, store,
                                       checkpoint_sampling(ckpt, stride), config.workers);
    std::vector<PredictionRecord> predictions(split.windows.size());
    for (std::size_t i = 0; i < split.windows.size(); ++i) {
      predictions[i].clip_id = split.windows[i].clip_id;
      predictions[i].frame_index = split.windows[i].center_frame_index;
      predictions[i].face_id = split.windows[i].face_id;
      predictions[i].score = scores[i];
    }
    write_predictions_csv(predict_out, predictions);
    write_config_echo(predict_out + ".resolved.cfg", config);
    std::printf("predictions: %zu -> %s\n", predictions.size(), predict_out.c_str());
  });

  // evaluate ----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions against annotations");
  CommonOpts eval_opts;
  std::string eval_predictions;
  std::string eval_split = "test";
  std::string eval_out;
  bool eval_macro = false;
  double eval_threshold = 0.5;
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--predictions", eval_predictions, "prediction CSV")->required();
  eval_cmd->add_option("--split", eval_split, "train|val|test|all (default test)");
  eval_cmd->add_option("--threshold", eval_threshold, "accuracy decision threshold");
  eval_cmd->add_flag("--macro", eval_macro, "also report two-class macro mAP");
  eval_cmd->add_option("--out", eval_out, "write the JSON report to a file");
  eval_cmd->callback([&]() {
    const RunConfig config = resolve_config(eval_opts);
    const DatasetLayout layout{config.root};
    const auto annotations = load_split_annotations(layout, eval_split);
    const auto predictions = read_predictions_csv(eval_predictions);
    const MetricsReport report =
        evaluate_predictions(predictions, annotations, eval_threshold, eval_macro);
    std::printf("%s", metrics_report_text(report).c_str());
    std::printf("%s\n", metrics_report_json(report).c_str());
    if (!eval_out.empty()) {
      std::ofstream out(eval_out);
      if (!out) throw Error("cannot write report: " + eval_out);
      out << metrics_report_json(report) << '\n';
      write_config_echo(eval_out + ".resolved.cfg", config);
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
