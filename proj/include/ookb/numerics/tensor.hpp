#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ookb/errors.hpp"

namespace ookb::numerics {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Index = Eigen::Index;

// A named tensor plus its gradient and Adam moments. Buffers (batch-norm
// running statistics) are stored the same way with trainable == false and
// are never touched by the optimizer.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  Matrix<Scalar> adam_m;
  Matrix<Scalar> adam_v;
  std::int64_t adam_steps = 0;
  bool trainable = true;
};

// Owns every parameter of a model. Handles are stable indices, so a store
// (and anything holding handles into it) copies by value.
template <typename Scalar>
class ParamStore {
 public:
  using Handle = std::size_t;

  Handle add(std::string name, Matrix<Scalar> init, bool trainable = true) {
    if (index_.count(name) != 0) throw NumericalFault("duplicate parameter name: " + name);
    Parameter<Scalar> p;
    p.name = name;
    p.grad = Matrix<Scalar>::Zero(init.rows(), init.cols());
    if (trainable) {
      p.adam_m = Matrix<Scalar>::Zero(init.rows(), init.cols());
      p.adam_v = Matrix<Scalar>::Zero(init.rows(), init.cols());
    }
    p.value = std::move(init);
    p.trainable = trainable;
    params_.push_back(std::move(p));
    index_.emplace(std::move(name), params_.size() - 1);
    return params_.size() - 1;
  }

  Parameter<Scalar>& operator[](Handle h) { return params_[h]; }
  const Parameter<Scalar>& operator[](Handle h) const { return params_[h]; }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Handle handle(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw NumericalFault("no parameter named " + name);
    return it->second;
  }
  Parameter<Scalar>& get(const std::string& name) { return params_[handle(name)]; }
  const Parameter<Scalar>& get(const std::string& name) const { return params_[handle(name)]; }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

 private:
  std::vector<Parameter<Scalar>> params_;
  std::unordered_map<std::string, Handle> index_;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace ookb::numerics
