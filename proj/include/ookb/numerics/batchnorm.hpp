#pragma once

#include <cmath>

#include "ookb/numerics/tape.hpp"

namespace ookb::numerics {

enum class BatchNormMode { Training, Inference };

struct BatchNormOptions {
  // running = momentum * running + (1 - momentum) * batch
  double momentum = 0.9;
  double epsilon = 1e-5;
};

// Handles into a ParamStore: gamma and beta are trainable d x 1, the running
// statistics are d x 1 buffers initialized to mean 0, variance 1.
struct BatchNormState {
  std::size_t gamma = 0;
  std::size_t beta = 0;
  std::size_t running_mean = 0;
  std::size_t running_var = 0;
  BatchNormOptions options;
};

template <typename Scalar>
BatchNormState add_batchnorm(ParamStore<Scalar>& store, const std::string& prefix, Index dim,
                             BatchNormOptions options = {}) {
  if (!(options.epsilon > 0)) throw NumericalFault("batchnorm epsilon must be positive");
  BatchNormState s;
  s.gamma = store.add(prefix + "/gamma", Matrix<Scalar>::Ones(dim, 1));
  s.beta = store.add(prefix + "/beta", Matrix<Scalar>::Zero(dim, 1));
  s.running_mean = store.add(prefix + "/running_mean", Matrix<Scalar>::Zero(dim, 1), false);
  s.running_var = store.add(prefix + "/running_var", Matrix<Scalar>::Ones(dim, 1), false);
  s.options = options;
  return s;
}

// Per-feature (per-row) normalization of a d x m batch.
//
// Training: normalize by the batch mean and biased variance, then update the
// running statistics (the running variance takes the unbiased estimate when
// m > 1; a single-column batch only moves the running mean). A single column
// normalizes to 0, so the output is beta.
// Inference: normalize by the running statistics.
template <typename Scalar>
Var<Scalar> batchnorm(Var<Scalar> x, Var<Scalar> gamma, Var<Scalar> beta, ParamStore<Scalar>& store,
                      const BatchNormState& state, BatchNormMode mode) {
  const auto& xv = x.value();
  const Index d = xv.rows();
  const Index m = xv.cols();
  if (gamma.rows() != d || beta.rows() != d || gamma.cols() != 1 || beta.cols() != 1)
    throw NumericalFault("batchnorm: gamma/beta must be " + std::to_string(d) + " x 1");
  const Scalar eps = static_cast<Scalar>(state.options.epsilon);

  Vector<Scalar> mean;
  Vector<Scalar> var;
  if (mode == BatchNormMode::Training) {
    if (m < 1) throw NumericalFault("batchnorm: training mode needs a nonempty batch");
    mean = xv.rowwise().mean();
    var = (xv.colwise() - mean).array().square().rowwise().mean().matrix();
    auto& rm = store[state.running_mean].value;
    auto& rv = store[state.running_var].value;
    const auto mom = static_cast<Scalar>(state.options.momentum);
    rm = mom * rm + (Scalar(1) - mom) * mean;
    if (m > 1) rv = mom * rv + (Scalar(1) - mom) * var * (static_cast<Scalar>(m) / static_cast<Scalar>(m - 1));
  } else {
    mean = store[state.running_mean].value.col(0);
    var = store[state.running_var].value.col(0);
  }
  const Vector<Scalar> inv_std = (var.array() + eps).rsqrt().matrix();
  Matrix<Scalar> xhat = ((xv.colwise() - mean).array().colwise() * inv_std.array()).matrix();
  Matrix<Scalar> y = ((xhat.array().colwise() * gamma.value().col(0).array()).colwise() +
                      beta.value().col(0).array())
                         .matrix();

  const bool training = mode == BatchNormMode::Training;
  return x.tape().record(std::move(y), [x, gamma, beta, xhat = std::move(xhat), inv_std, training](
                                           const Matrix<Scalar>& g, Tape<Scalar>& t) {
    const Index m = g.cols();
    t.accumulate(gamma, (g.array() * xhat.array()).rowwise().sum().matrix());
    t.accumulate(beta, g.rowwise().sum());
    const Matrix<Scalar> gxhat = (g.array().colwise() * gamma.value().col(0).array()).matrix();
    if (!training) {
      t.accumulate(x, (gxhat.array().colwise() * inv_std.array()).matrix());
      return;
    }
    const Vector<Scalar> sum_g = gxhat.rowwise().sum();
    const Vector<Scalar> sum_gx = (gxhat.array() * xhat.array()).rowwise().sum().matrix();
    Matrix<Scalar> gx = ((gxhat * static_cast<Scalar>(m)).colwise() - sum_g).array() -
                        (xhat.array().colwise() * sum_gx.array());
    gx = (gx.array().colwise() * (inv_std.array() / static_cast<Scalar>(m))).matrix();
    t.accumulate(x, gx);
  });
}

}  // namespace ookb::numerics
