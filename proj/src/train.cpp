#include "gazemae/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

#include "gazemae/errors.hpp"
#include "gazemae/eval.hpp"
#include "gazemae/rng.hpp"

namespace gazemae {

void TrainSettings::validate() const {
  sampling.validate();
  augment.validate();
  optim.validate();
  if (batch_size < 1) throw ValidationError("TrainSettings: batch_size must be >= 1");
  if (accum_steps < 1) throw ValidationError("TrainSettings: accum_steps must be >= 1");
  if (batch_size % accum_steps != 0) {
    throw ValidationError("TrainSettings: batch_size must be divisible by accum_steps");
  }
  if (workers < 1) throw ValidationError("TrainSettings: workers must be >= 1");
}

std::uint64_t window_augment_seed(std::uint64_t seed, int epoch, const WindowSample& window) {
  return derive_seed(seed, "augment",
                     {static_cast<std::uint64_t>(epoch), fnv1a64(window.clip_id),
                      fnv1a64(window.face_id), static_cast<std::uint64_t>(window.center_frame_index)});
}

std::uint64_t window_mask_seed(std::uint64_t seed, int epoch, const WindowSample& window) {
  return derive_seed(seed, "tubemask",
                     {static_cast<std::uint64_t>(epoch), fnv1a64(window.clip_id),
                      fnv1a64(window.face_id), static_cast<std::uint64_t>(window.center_frame_index)});
}

namespace {

// Contiguous [begin, end) chunk of work for worker w out of n items.
std::pair<std::size_t, std::size_t> worker_chunk(std::size_t n, int workers, int w) {
  const std::size_t per = (n + static_cast<std::size_t>(workers) - 1) / workers;
  const std::size_t begin = std::min(n, per * static_cast<std::size_t>(w));
  const std::size_t end = std::min(n, begin + per);
  return {begin, end};
}

// Run `fn(w)` on `workers` threads, capturing exceptions so a failing worker
// surfaces as a normal throw on the calling thread.
template <typename Fn>
void run_workers(int workers, Fn&& fn) {
  if (workers == 1) {
    fn(0);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w]() {
      try {
        fn(w);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

enum class Objective { kClassification, kReconstruction };

struct EpochContext {
  const VideoMae* model = nullptr;
  const std::vector<WindowSample>* windows = nullptr;
  const FrameStore* store = nullptr;
  const TrainSettings* settings = nullptr;
  Objective objective = Objective::kClassification;
  int epoch = 0;
};

// Materialize + (for classification) augment + normalize one training sample.
VideoTensorD prepare_sample(const EpochContext& ctx, const WindowSample& window, bool augmented) {
  const auto& settings = *ctx.settings;
  VideoTensor raw = materialize_window(window, *ctx.store, settings.sampling);
  if (augmented) {
    const AugmentState state =
        sample_window_augment(window_augment_seed(settings.seed, ctx.epoch, window),
                              settings.augment, raw.height, raw.width);
    raw = apply_augment(state, raw, settings.sampling.resolution);
  }
  return normalize_window(raw, ctx.model->config().pixel_mean, ctx.model->config().pixel_std);
}

double sample_loss_grad(const EpochContext& ctx, const WindowSample& window,
                        std::span<double> grad) {
  if (ctx.objective == Objective::kClassification) {
    const VideoTensorD input = prepare_sample(ctx, window, /*augmented=*/true);
    return ctx.model->classification_loss_grad(input, window.label, grad);
  }
  const VideoTensorD input = prepare_sample(ctx, window, /*augmented=*/false);
  const TubeMask mask =
      generate_tube_mask(window_mask_seed(ctx.settings->seed, ctx.epoch, window),
                         ctx.model->config().grid(), ctx.model->config().mask_ratio);
  return ctx.model->mae_loss_grad(input, mask, grad);
}

// One optimizer step's gradient: mean over `batch` window indices, reduced
// over fixed worker chunks so the result is reproducible for a given
// (workers, accum_steps) setting.
double batch_gradient(const EpochContext& ctx, const std::vector<std::size_t>& order,
                      std::size_t batch_begin, std::vector<std::vector<double>>& worker_grads,
                      std::vector<double>& grad_out) {
  const auto& settings = *ctx.settings;
  const std::size_t batch = static_cast<std::size_t>(settings.batch_size);
  const std::size_t micro = batch / static_cast<std::size_t>(settings.accum_steps);
  std::fill(grad_out.begin(), grad_out.end(), 0.0);
  std::vector<double> losses(batch, 0.0);

  for (int pass = 0; pass < settings.accum_steps; ++pass) {
    const std::size_t pass_begin = batch_begin + static_cast<std::size_t>(pass) * micro;
    const int workers = settings.workers;
    for (auto& g : worker_grads) std::fill(g.begin(), g.end(), 0.0);

    auto run_worker = [&](int w) {
      const auto [lo, hi] = worker_chunk(micro, workers, w);
      auto& grad = worker_grads[static_cast<std::size_t>(w)];
      for (std::size_t i = lo; i < hi; ++i) {
        const std::size_t sample_pos = pass_begin + i;
        const WindowSample& window = (*ctx.windows)[order[sample_pos]];
        losses[sample_pos - batch_begin] = sample_loss_grad(ctx, window, grad);
      }
    };

    run_workers(workers, run_worker);
    for (const auto& g : worker_grads) {
      for (std::size_t i = 0; i < grad_out.size(); ++i) grad_out[i] += g[i];
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (auto& g : grad_out) g *= inv_batch;
  double loss = 0;
  for (double l : losses) loss += l;
  return loss * inv_batch;
}

struct ValMetrics {
  std::optional<double> map;
  double acc = 0;
};

ValMetrics validate_epoch(const VideoMae& model, const std::vector<WindowSample>& val_windows,
                          const FrameStore& store, const TrainSettings& settings) {
  const auto scores = predict_scores(model, val_windows, store, settings.sampling,
                                     settings.workers);
  std::vector<int> labels(val_windows.size());
  for (std::size_t i = 0; i < val_windows.size(); ++i) labels[i] = val_windows[i].label;
  ValMetrics out;
  out.map = average_precision(scores, labels);
  out.acc = accuracy(scores, labels);
  return out;
}

Checkpoint snapshot(const VideoMae& model, const AdamW& opt, const TrainSettings& settings,
                    int epoch, std::int64_t global_step,
                    const std::vector<EpochMetrics>& history) {
  Checkpoint ckpt;
  ckpt.model_config = model.config();
  ckpt.params = model.params().values();
  ckpt.adam_m = opt.first_moment();
  ckpt.adam_v = opt.second_moment();
  ckpt.adam_steps = opt.step_count();
  ckpt.epoch = epoch;
  ckpt.global_step = global_step;
  ckpt.root_seed = settings.seed;
  ckpt.rng_state = Rng(derive_seed(settings.seed, "trainer", {static_cast<std::uint64_t>(epoch)}))
                       .serialize_state();
  ckpt.history = history;
  ckpt.config_echo = settings.config_echo;
  return ckpt;
}

TrainResult run_training(VideoMae& model, const std::vector<WindowSample>& train_windows,
                         const std::vector<WindowSample>* val_windows, const FrameStore& store,
                         const TrainSettings& settings_in, const std::filesystem::path& out_dir,
                         Objective objective, const Checkpoint* resume) {
  TrainSettings settings = settings_in;
  settings.validate();
  if (train_windows.empty()) throw ValidationError("training split is empty");
  if (objective == Objective::kClassification && (!val_windows || val_windows->empty())) {
    throw ValidationError("validation split is empty");
  }
  const std::size_t n = train_windows.size();
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>(n) / settings.batch_size;
  if (steps_per_epoch < 1) {
    throw ValidationError("batch_size " + std::to_string(settings.batch_size) +
                          " exceeds training set size " + std::to_string(n));
  }
  settings.schedule.steps_per_epoch = steps_per_epoch;
  settings.schedule.validate();

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory: " + out_dir.string());

  AdamW opt(model.params().size(), settings.optim, model.params().decay_mask());
  TrainResult result;
  int start_epoch = 0;
  std::int64_t global_step = 0;
  if (resume) {
    if (resume->params.size() != model.params().size()) {
      throw ValidationError("resume checkpoint does not match model parameter count");
    }
    model.params().values() = resume->params;
    opt.restore(resume->adam_m, resume->adam_v, resume->adam_steps);
    start_epoch = resume->epoch;
    global_step = resume->global_step;
    result.history = resume->history;
  }

  EpochContext ctx;
  ctx.model = &model;
  ctx.windows = &train_windows;
  ctx.store = &store;
  ctx.settings = &settings;
  ctx.objective = objective;

  std::vector<std::vector<double>> worker_grads(
      static_cast<std::size_t>(settings.workers),
      std::vector<double>(model.params().size(), 0.0));
  std::vector<double> grad(model.params().size(), 0.0);

  std::optional<double> best_map;
  int best_epoch = 0;
  for (const auto& m : result.history) {
    if (m.val_map && (!best_map || *m.val_map > *best_map)) {
      best_map = m.val_map;
      best_epoch = m.epoch;
    }
  }

  const std::filesystem::path last_path = out_dir / "last.ckpt";
  const std::filesystem::path best_path = out_dir / "best.ckpt";

  std::vector<std::size_t> order(n);
  for (int epoch = start_epoch; epoch < settings.schedule.total_epochs; ++epoch) {
    ctx.epoch = epoch;
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(settings.seed, "shuffle", {static_cast<std::uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0;
    double last_lr = 0;
    for (std::int64_t step = 0; step < steps_per_epoch; ++step) {
      const double lr = lr_at_step(settings.schedule, global_step);
      const double loss =
          batch_gradient(ctx, order, static_cast<std::size_t>(step) * settings.batch_size,
                         worker_grads, grad);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss " << loss << " at epoch " << epoch + 1 << " step "
            << step;
        throw Error(msg.str());
      }
      opt.step(model.params(), grad, lr);
      result.lr_trace.push_back(lr);
      epoch_loss += loss;
      last_lr = lr;
      ++global_step;
    }
    epoch_loss /= static_cast<double>(steps_per_epoch);

    EpochMetrics metrics;
    metrics.epoch = epoch + 1;
    metrics.train_loss = epoch_loss;
    metrics.lr = last_lr;
    if (objective == Objective::kClassification) {
      const ValMetrics val = validate_epoch(model, *val_windows, store, settings);
      metrics.val_map = val.map;
      metrics.val_acc = val.acc;
    }
    result.history.push_back(metrics);
    if (settings.on_epoch) settings.on_epoch(metrics);

    const Checkpoint ckpt = snapshot(model, opt, settings, epoch + 1, global_step, result.history);
    save_checkpoint(last_path, ckpt);
    if (objective == Objective::kClassification && metrics.val_map &&
        (!best_map || *metrics.val_map > *best_map)) {
      best_map = metrics.val_map;
      best_epoch = epoch + 1;
      save_checkpoint(best_path, ckpt);
    }
    if (settings.stop_after_epochs > 0 && epoch + 1 >= settings.stop_after_epochs) break;
  }

  write_metrics_csv(out_dir / "metrics.csv", result.history);
  result.last_checkpoint = last_path;
  if (objective == Objective::kClassification && best_map) {
    result.best_checkpoint = best_path;
    result.best_epoch = best_epoch;
  }
  return result;
}

}  // namespace

TrainResult finetune(VideoMae& model, const std::vector<WindowSample>& train_windows,
                     const std::vector<WindowSample>& val_windows, const FrameStore& store,
                     const TrainSettings& settings, const std::filesystem::path& out_dir,
                     const Checkpoint* resume) {
  return run_training(model, train_windows, &val_windows, store, settings, out_dir,
                      Objective::kClassification, resume);
}

TrainResult pretrain_mae(VideoMae& model, const std::vector<WindowSample>& windows,
                         const FrameStore& store, const TrainSettings& settings,
                         const std::filesystem::path& out_dir, const Checkpoint* resume) {
  return run_training(model, windows, nullptr, store, settings, out_dir,
                      Objective::kReconstruction, resume);
}

std::vector<double> predict_scores(const VideoMae& model,
                                   const std::vector<WindowSample>& windows,
                                   const FrameStore& store, const SamplingSpec& sampling,
                                   int workers) {
  sampling.validate();
  if (workers < 1) throw ValidationError("predict_scores: workers must be >= 1");
  std::vector<double> scores(windows.size(), 0.0);
  auto run_worker = [&](int w) {
    const auto [lo, hi] = worker_chunk(windows.size(), workers, w);
    for (std::size_t i = lo; i < hi; ++i) {
      const VideoTensor raw = materialize_window(windows[i], store, sampling);
      const VideoTensorD input =
          normalize_window(raw, model.config().pixel_mean, model.config().pixel_std);
      scores[i] = model.classify(input).p_positive();
    }
  };
  run_workers(workers, run_worker);
  return scores;
}

}  // namespace gazemae
