#pragma once

#include <cmath>

#include "ookb/numerics/tensor.hpp"

namespace ookb::numerics {

struct AdamConfig {
  double alpha1 = 0.01;
  double alpha2 = 0.0001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// alpha1 / (alpha2 * k + 1), k = number of completed epochs.
inline double adam_step_size(const AdamConfig& cfg, std::int64_t epoch) {
  return cfg.alpha1 / (cfg.alpha2 * static_cast<double>(epoch) + 1.0);
}

// One bias-corrected Adam update of every trainable parameter from its grad.
template <typename Scalar>
void adam_step(ParamStore<Scalar>& store, const AdamConfig& cfg, std::int64_t epoch) {
  if (epoch < 0) throw NumericalFault("adam_step: negative epoch");
  const double lr = adam_step_size(cfg, epoch);
  for (auto& p : store) {
    if (!p.trainable) continue;
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      throw NumericalFault("adam_step: gradient shape mismatch for " + p.name);
    ++p.adam_steps;
    const auto b1 = static_cast<Scalar>(cfg.beta1);
    const auto b2 = static_cast<Scalar>(cfg.beta2);
    p.adam_m = b1 * p.adam_m + (Scalar(1) - b1) * p.grad;
    p.adam_v = b2 * p.adam_v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.adam_steps));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.adam_steps));
    const auto step = static_cast<Scalar>(lr / c1);
    const auto v_scale = static_cast<Scalar>(1.0 / c2);
    const auto eps = static_cast<Scalar>(cfg.epsilon);
    p.value.array() -= step * p.adam_m.array() / ((p.adam_v.array() * v_scale).sqrt() + eps);
  }
}

}  // namespace ookb::numerics
