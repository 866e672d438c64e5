#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>

#include "ookb/numerics/tape.hpp"

namespace ookb::numerics {

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error, so gradients that are zero on
  // both sides do not divide by zero.
  double floor = 1e-6;
  // Roundoff allowance: differences below
  //   roundoff_ulps * eps * max(|loss(+h)|, |loss(-h)|) / (2h)
  // are cancellation noise of the difference quotient, not gradient error.
  double roundoff_ulps = 16;
  // Test hook: negate the analytic gradient of this parameter before comparing.
  std::string flip_sign_of;
};

struct GradcheckResult {
  double max_relative_error = 0;
  std::string worst_parameter;
  Index worst_index = -1;
  std::size_t checked = 0;
  std::map<std::string, double> per_parameter;
  bool passed = true;
};

inline double relative_error(double analytic, double numeric, double floor, double noise = 0) {
  const double diff = std::max(0.0, std::abs(analytic - numeric) - noise);
  return diff / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares d(loss)/d(param) from the tape against central differences for
// every element of every trainable parameter in `store`. `loss` builds the
// scalar loss on the given tape reading parameters from `store`. Buffers
// (running statistics) are restored after each evaluation so the loss is a
// pure function of the trainable parameters.
inline GradcheckResult gradcheck(ParamStore<double>& store, const std::function<Var<double>(Tape<double>&)>& loss,
                                 const GradcheckOptions& options = {}) {
  std::vector<Matrix<double>> buffers;
  for (const auto& p : store) buffers.push_back(p.value);
  auto restore_buffers = [&] {
    std::size_t i = 0;
    for (auto& p : store) {
      if (!p.trainable) p.value = buffers[i];
      ++i;
    }
  };
  auto evaluate = [&] {
    Tape<double> tape(false);
    const double v = loss(tape).value()(0, 0);
    restore_buffers();
    return v;
  };

  store.zero_grad();
  {
    Tape<double> tape(true);
    tape.backward(loss(tape));
  }
  restore_buffers();

  GradcheckResult result;
  for (auto& p : store) {
    if (!p.trainable) continue;
    Matrix<double> analytic = p.grad;
    if (p.name == options.flip_sign_of) analytic = -analytic;
    double worst = 0;
    for (Index i = 0; i < p.value.size(); ++i) {
      const double original = p.value.data()[i];
      p.value.data()[i] = original + options.step;
      const double up = evaluate();
      p.value.data()[i] = original - options.step;
      const double down = evaluate();
      p.value.data()[i] = original;
      const double numeric = (up - down) / (2 * options.step);
      const double noise = options.roundoff_ulps * std::numeric_limits<double>::epsilon() *
                           std::max(std::abs(up), std::abs(down)) / (2 * options.step);
      const double err = relative_error(analytic.data()[i], numeric, options.floor, noise);
      worst = std::max(worst, err);
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p.name;
        result.worst_index = i;
      }
      ++result.checked;
    }
    result.per_parameter[p.name] = worst;
  }
  result.passed = result.max_relative_error <= options.tolerance;
  return result;
}

}  // namespace ookb::numerics
