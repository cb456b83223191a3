#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "gazemae/checkpoint.hpp"
#include "gazemae/errors.hpp"
#include "gazemae/pipeline.hpp"
#include "gazemae/synth.hpp"
#include "gazemae/train.hpp"
#include "test_util.hpp"

using namespace gazemae;

namespace {

// Micro dataset + settings sized so a full finetune run takes well under a
// second.
struct MicroRun {
  test::TempDir dir{"train"};
  SplitWindows train;
  SplitWindows val;
  ModelConfig model_config;
  TrainSettings settings;

  explicit MicroRun(std::uint64_t seed = 42) {
    SynthSpec synth;
    synth.n_clips = 16;
    synth.frames_per_clip = 5;
    synth.image_size = 64;
    synth.imbalance_ratio = 3.0;
    synth.seed = derive_seed(seed, "micro-synth");
    generate_dataset(synth, dir.path());

    model_config = test::tiny_model_config();

    settings.sampling = SamplingSpec{3, 3, model_config.image_size};
    settings.augment = AugmentPolicy{};
    settings.augment.rand_augment = decode_randaugment_spec("rand-m7-n2-mstd0.5-inc1");
    settings.optim = OptimizerSpec{};
    settings.schedule.start_lr = 1e-5;
    settings.schedule.peak_lr = 1e-3;
    settings.schedule.end_lr = 1e-5;
    settings.schedule.warmup_epochs = 1;
    settings.schedule.total_epochs = 3;
    settings.batch_size = 4;
    settings.workers = 1;
    settings.seed = seed;
    settings.config_echo = "micro";

    const DatasetLayout layout{dir.path()};
    train = load_split_windows(layout, "train", settings.sampling);
    val = load_split_windows(layout, "val", SamplingSpec{1, 3, model_config.image_size});
  }

  FrameStore store() const { return FrameStore(DatasetLayout{dir.path()}.frames_root()); }
};

}  // namespace

TEST_CASE("finetune writes metrics, checkpoints, and an lr trace matching the schedule") {
  MicroRun run;
  VideoMae model(run.model_config, run.settings.seed);
  const auto out_dir = run.dir.path() / "run";
  const auto result =
      finetune(model, run.train.windows, run.val.windows, run.store(), run.settings, out_dir);

  REQUIRE(result.history.size() == 3);
  CHECK(std::filesystem::exists(out_dir / "metrics.csv"));
  CHECK(std::filesystem::exists(result.last_checkpoint));

  ScheduleSpec sched = run.settings.schedule;
  sched.steps_per_epoch = static_cast<std::int64_t>(run.train.windows.size()) / 4;
  REQUIRE(result.lr_trace.size() ==
          static_cast<std::size_t>(sched.steps_per_epoch) * 3);
  for (std::size_t i = 0; i < result.lr_trace.size(); ++i) {
    REQUIRE(result.lr_trace[i] == lr_at_step(sched, static_cast<std::int64_t>(i)));
  }
  for (const auto& m : result.history) {
    CHECK(std::isfinite(m.train_loss));
    REQUIRE(m.val_acc.has_value());
  }
}

TEST_CASE("resume from checkpoint continues identically") {
  MicroRun base(7);

  // uninterrupted reference
  VideoMae model_a(base.model_config, base.settings.seed);
  const auto result_a = finetune(model_a, base.train.windows, base.val.windows, base.store(),
                                 base.settings, base.dir.path() / "run_a");

  // stop after two epochs, then resume into a fresh model
  TrainSettings stopped = base.settings;
  stopped.stop_after_epochs = 2;
  VideoMae model_b(base.model_config, base.settings.seed);
  finetune(model_b, base.train.windows, base.val.windows, base.store(), stopped,
           base.dir.path() / "run_b");

  const Checkpoint ckpt = load_checkpoint(base.dir.path() / "run_b" / "last.ckpt");
  CHECK(ckpt.epoch == 2);
  VideoMae model_c(base.model_config, base.settings.seed);
  const auto result_c = finetune(model_c, base.train.windows, base.val.windows, base.store(),
                                 base.settings, base.dir.path() / "run_c", &ckpt);

  REQUIRE(result_c.history.size() == result_a.history.size());
  CHECK(result_c.history.back().train_loss == result_a.history.back().train_loss);
  CHECK(model_c.params().values() == model_a.params().values());

  // the metrics CSVs of the uninterrupted and resumed runs are identical
  std::ifstream fa(base.dir.path() / "run_a" / "metrics.csv");
  std::ifstream fc(base.dir.path() / "run_c" / "metrics.csv");
  std::stringstream sa, sc;
  sa << fa.rdbuf();
  sc << fc.rdbuf();
  CHECK(sa.str() == sc.str());
}

TEST_CASE("two identical runs produce identical metrics") {
  MicroRun base(11);
  VideoMae model_a(base.model_config, base.settings.seed);
  const auto ra = finetune(model_a, base.train.windows, base.val.windows, base.store(),
                           base.settings, base.dir.path() / "d1");
  VideoMae model_b(base.model_config, base.settings.seed);
  const auto rb = finetune(model_b, base.train.windows, base.val.windows, base.store(),
                           base.settings, base.dir.path() / "d2");
  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].train_loss == rb.history[i].train_loss);
    CHECK(ra.history[i].val_acc == rb.history[i].val_acc);
  }
  CHECK(model_a.params().values() == model_b.params().values());
}

TEST_CASE("empty training split is rejected") {
  MicroRun base(13);
  VideoMae model(base.model_config, 1);
  const std::vector<WindowSample> empty;
  CHECK_THROWS_AS(finetune(model, empty, base.val.windows, base.store(), base.settings,
                           base.dir.path() / "empty"),
                  ValidationError);
  CHECK_THROWS_AS(finetune(model, base.train.windows, empty, base.store(), base.settings,
                           base.dir.path() / "empty2"),
                  ValidationError);
}

TEST_CASE("training loss decreases on a fixed tiny batch (median over seeds)") {
  MicroRun base(17);
  const FrameStore store = base.store();
  // fixed batch of 4 windows, full-batch steps
  std::vector<WindowSample> batch(base.train.windows.begin(), base.train.windows.begin() + 4);

  int improved = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    VideoMae model(base.model_config, 1000 + seed);
    AdamW opt(model.params().size(), OptimizerSpec{}, model.params().decay_mask());
    std::vector<double> grad(model.params().size(), 0.0);

    std::vector<VideoTensorD> inputs;
    for (const auto& w : batch) {
      inputs.push_back(normalize_window(materialize_window(w, store, base.settings.sampling),
                                        model.config().pixel_mean, model.config().pixel_std));
    }
    const auto batch_loss = [&](bool with_grad) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        loss += with_grad ? model.classification_loss_grad(inputs[i], batch[i].label, grad)
                          : model.classification_loss(inputs[i], batch[i].label);
      }
      return loss / static_cast<double>(batch.size());
    };

    const double initial = batch_loss(false);
    double final_loss = initial;
    for (int step = 0; step < 50; ++step) {
      final_loss = batch_loss(true);
      for (auto& g : grad) g /= static_cast<double>(batch.size());
      opt.step(model.params(), grad, 1e-3);
    }
    if (final_loss < initial) ++improved;
  }
  CHECK(improved >= 3);  // median seed improves
}

TEST_CASE("pretraining lowers reconstruction loss after one epoch (median over seeds)") {
  MicroRun base(19);
  const FrameStore store = base.store();

  int improved = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainSettings settings = base.settings;
    settings.seed = 3000 + seed;
    settings.schedule.total_epochs = 1;
    settings.schedule.warmup_epochs = 0;
    settings.schedule.peak_lr = 1e-3;

    VideoMae model(base.model_config, 2000 + seed);
    // initialization loss with the same per-window masks the first epoch uses
    double init_loss = 0;
    for (const auto& w : base.train.windows) {
      const auto input = normalize_window(materialize_window(w, store, settings.sampling),
                                          model.config().pixel_mean, model.config().pixel_std);
      const auto mask = generate_tube_mask(window_mask_seed(settings.seed, 0, w),
                                           model.config().grid(), model.config().mask_ratio);
      init_loss += model.mae_loss(input, mask);
    }
    init_loss /= static_cast<double>(base.train.windows.size());

    const auto result = pretrain_mae(model, base.train.windows, store, settings,
                                     base.dir.path() / ("pre" + std::to_string(seed)));
    REQUIRE(result.history.size() == 1);
    CHECK_FALSE(result.history[0].val_map.has_value());
    if (result.history[0].train_loss < init_loss) ++improved;
  }
  CHECK(improved >= 3);
}

TEST_CASE("pretraining first-epoch loss is deterministic for a fixed seed") {
  MicroRun base(23);
  const FrameStore store = base.store();
  TrainSettings settings = base.settings;
  settings.schedule.total_epochs = 1;
  settings.schedule.warmup_epochs = 0;

  VideoMae model_a(base.model_config, 5);
  const auto ra =
      pretrain_mae(model_a, base.train.windows, store, settings, base.dir.path() / "pa");
  VideoMae model_b(base.model_config, 5);
  const auto rb =
      pretrain_mae(model_b, base.train.windows, store, settings, base.dir.path() / "pb");
  CHECK(ra.history[0].train_loss == rb.history[0].train_loss);
}

TEST_CASE("checkpoint round trip preserves every field") {
  MicroRun base(29);
  VideoMae model(base.model_config, 3);
  AdamW opt(model.params().size(), OptimizerSpec{}, model.params().decay_mask());

  Checkpoint ckpt;
  ckpt.model_config = model.config();
  ckpt.params = model.params().values();
  ckpt.adam_m = opt.first_moment();
  ckpt.adam_v = opt.second_moment();
  ckpt.adam_steps = 17;
  ckpt.epoch = 4;
  ckpt.global_step = 68;
  ckpt.root_seed = 42;
  ckpt.rng_state = Rng(9).serialize_state();
  EpochMetrics m;
  m.epoch = 4;
  m.train_loss = 0.25;
  m.val_map = 0.75;
  m.val_acc = 0.9;
  m.lr = 1e-4;
  ckpt.history.push_back(m);
  ckpt.config_echo = "echo-text";

  const auto path = base.dir.path() / "ckpt.bin";
  save_checkpoint(path, ckpt);
  const auto back = load_checkpoint(path);
  CHECK(back.params == ckpt.params);
  CHECK(back.adam_m == ckpt.adam_m);
  CHECK(back.adam_steps == 17);
  CHECK(back.epoch == 4);
  CHECK(back.global_step == 68);
  CHECK(back.root_seed == 42);
  CHECK(back.rng_state == ckpt.rng_state);
  CHECK(back.config_echo == "echo-text");
  REQUIRE(back.history.size() == 1);
  CHECK(back.history[0].val_map == 0.75);
  CHECK(back.model_config.embed_dim == model.config().embed_dim);

  // loading junk fails loudly
  const auto junk = base.dir.path() / "junk.bin";
  {
    std::ofstream out(junk, std::ios::binary);
    out << "definitely not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(junk), ValidationError);
}

TEST_CASE("predict_scores is stable across worker counts here") {
  MicroRun base(31);
  VideoMae model(base.model_config, 8);
  const auto s1 = predict_scores(model, base.val.windows, base.store(), base.settings.sampling, 1);
  const auto s2 = predict_scores(model, base.val.windows, base.store(), base.settings.sampling, 2);
  REQUIRE(s1.size() == s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) REQUIRE(s1[i] == s2[i]);
}

TEST_CASE("window seeds vary by epoch and window identity") {
  WindowSample a;
  a.clip_id = "c1";
  a.face_id = "f";
  a.center_frame_index = 5;
  WindowSample b = a;
  b.center_frame_index = 6;
  CHECK(window_augment_seed(1, 0, a) != window_augment_seed(1, 1, a));
  CHECK(window_augment_seed(1, 0, a) != window_augment_seed(1, 0, b));
  CHECK(window_augment_seed(1, 0, a) != window_mask_seed(1, 0, a));
  CHECK(window_augment_seed(1, 0, a) == window_augment_seed(1, 0, a));
}
