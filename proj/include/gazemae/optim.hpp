#pragma once

#include <cstdint>
#include <vector>

#include "gazemae/model.hpp"

namespace gazemae {

struct OptimizerSpec {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.05;
  double eps = 1e-8;

  void validate() const;
};

// Linear warmup from start_lr to peak_lr over warmup_epochs, then cosine
// decay from peak_lr to end_lr over the remaining epochs.
struct ScheduleSpec {
  double start_lr = 1e-6;
  double peak_lr = 5e-6;
  double end_lr = 1e-6;
  int warmup_epochs = 3;
  int total_epochs = 10;
  std::int64_t steps_per_epoch = 1;

  std::int64_t warmup_steps() const { return static_cast<std::int64_t>(warmup_epochs) * steps_per_epoch; }
  std::int64_t total_steps() const { return static_cast<std::int64_t>(total_epochs) * steps_per_epoch; }
  void validate() const;
};

// Steps at or past total_steps clamp to end_lr.
double lr_at_step(const ScheduleSpec& sched, std::int64_t global_step);

// Decoupled weight decay Adam. Decay multiplies the parameter before the
// moment update is subtracted, so a zero-gradient step is exactly
// theta *= (1 - lr * weight_decay) for decayed parameters.
class AdamW {
 public:
  AdamW(std::size_t n_params, OptimizerSpec spec, std::vector<std::uint8_t> decay_mask);

  // Throws Error naming the parameter entry on a non-finite gradient.
  void step(ParamStore& params, const std::vector<double>& grads, double lr);

  std::int64_t step_count() const { return step_count_; }
  const OptimizerSpec& spec() const { return spec_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

  // Checkpoint restore.
  void restore(std::vector<double> m, std::vector<double> v, std::int64_t step_count);

 private:
  OptimizerSpec spec_;
  std::vector<std::uint8_t> decay_mask_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t step_count_ = 0;
};

}  // namespace gazemae
