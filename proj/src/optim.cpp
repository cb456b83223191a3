#include "gazemae/optim.hpp"

#include <cmath>
#include <sstream>

#include "gazemae/errors.hpp"

namespace gazemae {

void OptimizerSpec::validate() const {
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
    throw ValidationError("OptimizerSpec: betas must lie in [0,1)");
  }
  if (weight_decay < 0) throw ValidationError("OptimizerSpec: weight_decay must be >= 0");
  if (!(eps > 0)) throw ValidationError("OptimizerSpec: eps must be positive");
}

void ScheduleSpec::validate() const {
  if (!(start_lr > 0) || !(peak_lr > 0) || !(end_lr > 0)) {
    throw ValidationError("ScheduleSpec: learning rates must be positive");
  }
  if (warmup_epochs < 0 || total_epochs <= 0 || warmup_epochs > total_epochs) {
    throw ValidationError("ScheduleSpec: require 0 <= warmup_epochs <= total_epochs");
  }
  if (steps_per_epoch <= 0) throw ValidationError("ScheduleSpec: steps_per_epoch must be positive");
}

double lr_at_step(const ScheduleSpec& sched, std::int64_t global_step) {
  sched.validate();
  if (global_step < 0) throw ValidationError("lr_at_step: negative step");
  const std::int64_t warmup = sched.warmup_steps();
  const std::int64_t total = sched.total_steps();
  if (global_step >= total) return sched.end_lr;
  if (global_step < warmup) {
    return sched.start_lr + (sched.peak_lr - sched.start_lr) *
                                (static_cast<double>(global_step) / static_cast<double>(warmup));
  }
  if (global_step == warmup) return sched.peak_lr;
  const double u =
      static_cast<double>(global_step - warmup) / static_cast<double>(total - warmup);
  return sched.end_lr + 0.5 * (sched.peak_lr - sched.end_lr) * (1.0 + std::cos(M_PI * u));
}

AdamW::AdamW(std::size_t n_params, OptimizerSpec spec, std::vector<std::uint8_t> decay_mask)
    : spec_(spec), decay_mask_(std::move(decay_mask)) {
  spec_.validate();
  if (decay_mask_.size() != n_params) {
    throw ValidationError("AdamW: decay mask size does not match parameter count");
  }
  m_.assign(n_params, 0.0);
  v_.assign(n_params, 0.0);
}

void AdamW::step(ParamStore& params, const std::vector<double>& grads, double lr) {
  if (!(lr > 0)) throw ValidationError("AdamW::step: lr must be positive");
  if (grads.size() != m_.size() || params.size() != m_.size()) {
    throw ValidationError("AdamW::step: buffer size mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      const auto& entry = params.entry_for_value(i);
      std::ostringstream msg;
      msg << "AdamW::step: non-finite gradient in parameter '" << entry.name << "' (flat index "
          << i << ")";
      throw Error(msg.str());
    }
  }

  ++step_count_;
  const double bc1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(step_count_));
  auto& theta = params.values();
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const double g = grads[i];
    m_[i] = spec_.beta1 * m_[i] + (1.0 - spec_.beta1) * g;
    v_[i] = spec_.beta2 * v_[i] + (1.0 - spec_.beta2) * g * g;
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    if (decay_mask_[i]) {
      theta[i] *= 1.0 - lr * spec_.weight_decay;
    }
    theta[i] -= lr * m_hat / (std::sqrt(v_hat) + spec_.eps);
  }
}

void AdamW::restore(std::vector<double> m, std::vector<double> v, std::int64_t step_count) {
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw ValidationError("AdamW::restore: moment buffer size mismatch");
  }
  m_ = std::move(m);
  v_ = std::move(v);
  step_count_ = step_count;
}

}  // namespace gazemae
