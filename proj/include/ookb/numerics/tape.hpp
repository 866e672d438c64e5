#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ookb/numerics/tensor.hpp"

namespace ookb::numerics {

template <typename Scalar>
class Tape;

// Handle to one node of a Tape.
template <typename Scalar>
class Var {
 public:
  using Mat = Matrix<Scalar>;

  Var() = default;
  Var(Tape<Scalar>* tape, int id) : tape_(tape), id_(id) {}
  Tape<Scalar>& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Mat& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape over dense column-batched matrices. A batch of d-vectors
// is a d x n matrix, one column per item.
//
// Nodes are recorded in evaluation order; backward() walks them in reverse.
// Gradients reach model parameters only through param() and gather(), which
// accumulate into Parameter::grad. A tape built with record_gradients=false
// keeps values only and never writes to a parameter.
template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;

  using Var = numerics::Var<Scalar>;

  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].value; }

  // Gradient accumulated so far; zero matrix if nothing reached the node.
  Mat grad(Var v) const {
    const auto& n = nodes_[static_cast<std::size_t>(v.id())];
    if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  Var constant(Mat value) { return push(std::move(value), {}); }

  // Copy of a whole parameter; backward adds into its grad.
  Var param(Parameter<Scalar>& p) {
    Var out = push(p.value, {});
    if (record_ && p.trainable) {
      auto* target = &p;
      node(out).backward = [target](const Mat& g, Tape&) { target->grad += g; };
    }
    return out;
  }
  Var param(const Parameter<Scalar>& p) {
    if (record_) throw NumericalFault("read-only parameter used on a recording tape: " + p.name);
    return push(p.value, {});
  }

  // Columns idx of a parameter (embedding lookup); backward scatter-adds.
  Var gather(Parameter<Scalar>& p, std::span<const Index> idx) {
    Var out = gather_impl(p, idx);
    if (record_ && p.trainable) {
      auto* target = &p;
      std::vector<Index> cols(idx.begin(), idx.end());
      node(out).backward = [target, cols = std::move(cols)](const Mat& g, Tape&) {
        for (std::size_t j = 0; j < cols.size(); ++j) target->grad.col(cols[j]) += g.col(static_cast<Index>(j));
      };
    }
    return out;
  }
  Var gather(const Parameter<Scalar>& p, std::span<const Index> idx) {
    if (record_) throw NumericalFault("read-only parameter used on a recording tape: " + p.name);
    return gather_impl(p, idx);
  }

  // Records an op node. `backward(g, tape)` receives the node's output
  // gradient and must call tape.accumulate() on its inputs.
  Var record(Mat value, std::function<void(const Mat&, Tape&)> backward) {
    return push(std::move(value), record_ ? std::move(backward) : std::function<void(const Mat&, Tape&)>{});
  }

  void accumulate(Var v, const Mat& g) {
    auto& n = node(v);
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }
  template <typename Expr>
  void accumulate_col(Var v, Index col, const Expr& g) {
    auto& n = node(v);
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad.col(col) += g;
  }

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable parameter.
  void backward(Var loss) {
    if (!record_) throw NumericalFault("backward() on a tape that does not record gradients");
    const auto& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) throw NumericalFault("backward() needs a scalar loss");
    if (!std::isfinite(static_cast<double>(lv(0, 0))))
      throw NumericalFault("non-finite loss: " + std::to_string(static_cast<double>(lv(0, 0))));
    accumulate(loss, Mat::Constant(1, 1, Scalar(1)));
    for (int i = loss.id(); i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.backward || n.grad.size() == 0) continue;
      Mat g = std::move(n.grad);
      n.grad = Mat();
      n.backward(g, *this);
      n.grad = std::move(g);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(const Mat&, Tape&)> backward;
  };

  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id())]; }

  Var push(Mat value, std::function<void(const Mat&, Tape&)> backward) {
    nodes_.push_back(Node{std::move(value), Mat(), std::move(backward)});
    return Var(this, static_cast<int>(nodes_.size() - 1));
  }

  Var gather_impl(const Parameter<Scalar>& p, std::span<const Index> idx) {
    Mat out(p.value.rows(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (idx[j] < 0 || idx[j] >= p.value.cols())
        throw NumericalFault("gather index " + std::to_string(idx[j]) + " out of range for " + p.name);
      out.col(static_cast<Index>(j)) = p.value.col(idx[j]);
    }
    return push(std::move(out), {});
  }

  bool record_;
  std::vector<Node> nodes_;
};

template <typename Scalar>
const Matrix<Scalar>& Var<Scalar>::value() const {
  return tape_->value(*this);
}

namespace detail {

template <typename Scalar>
void require_same_shape(const Matrix<Scalar>& a, const Matrix<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw NumericalFault(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
}

}  // namespace detail

// y_i = A x_i for every column x_i.
template <typename Scalar>
Var<Scalar> affine(Var<Scalar> a, Var<Scalar> x) {
  const auto& av = a.value();
  const auto& xv = x.value();
  if (av.cols() != xv.rows())
    throw NumericalFault("affine: A is " + std::to_string(av.rows()) + "x" + std::to_string(av.cols()) +
                         " but x has " + std::to_string(xv.rows()) + " rows");
  Matrix<Scalar> y = av * xv;
  return x.tape().record(std::move(y), [a, x](const Matrix<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(a, g * x.value().transpose());
    t.accumulate(x, a.value().transpose() * g);
  });
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a.value(), b.value(), "add");
  return a.tape().record(a.value() + b.value(), [a, b](const Matrix<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a.value(), b.value(), "sub");
  return a.tape().record(a.value() - b.value(), [a, b](const Matrix<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

// Elementwise product.
template <typename Scalar>
Var<Scalar> hadamard(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a.value(), b.value(), "hadamard");
  return a.tape().record(a.value().cwiseProduct(b.value()), [a, b](const Matrix<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(a, g.cwiseProduct(b.value()));
    t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

// scale * x + shift, elementwise.
template <typename Scalar>
Var<Scalar> scale_shift(Var<Scalar> x, Scalar scale, Scalar shift) {
  Matrix<Scalar> y = (x.value().array() * scale + shift).matrix();
  return x.tape().record(std::move(y),
                         [x, scale](const Matrix<Scalar>& g, Tape<Scalar>& t) { t.accumulate(x, g * scale); });
}

// Subgradient at 0 is 0.
template <typename Scalar>
Var<Scalar> relu(Var<Scalar> x) {
  Matrix<Scalar> y = x.value().cwiseMax(Scalar(0));
  return x.tape().record(std::move(y), [x](const Matrix<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(x, (x.value().array() > Scalar(0)).select(g, Scalar(0)).matrix());
  });
}

template <typename Scalar>
Var<Scalar> tanh_act(Var<Scalar> x) {
  Matrix<Scalar> y = x.value().array().tanh().matrix();
  return x.tape().record(y, [x, y](const Matrix<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(x, (g.array() * (Scalar(1) - y.array().square())).matrix());
  });
}

// [x]_+ elementwise; subgradient at 0 is 0.
template <typename Scalar>
Var<Scalar> hinge(Var<Scalar> x) {
  return relu(x);
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> x) {
  Matrix<Scalar> y(1, 1);
  y(0, 0) = x.value().sum();
  return x.tape().record(std::move(y), [x](const Matrix<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(x, Matrix<Scalar>::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

// Per-column L1 or L2 norm: d x n -> 1 x n. The L2 gradient at 0 is 0; the
// L1 gradient uses sign(0) = 0.
template <typename Scalar>
Var<Scalar> column_norm(Var<Scalar> x, int p) {
  if (p != 1 && p != 2) throw NumericalFault("column_norm: p must be 1 or 2");
  const auto& xv = x.value();
  Matrix<Scalar> y(1, xv.cols());
  for (Index j = 0; j < xv.cols(); ++j) y(0, j) = p == 1 ? xv.col(j).template lpNorm<1>() : xv.col(j).norm();
  return x.tape().record(y, [x, y, p](const Matrix<Scalar>& g, Tape<Scalar>& t) {
    const auto& xv = x.value();
    Matrix<Scalar> gx(xv.rows(), xv.cols());
    for (Index j = 0; j < xv.cols(); ++j) {
      if (p == 1) {
        gx.col(j) = xv.col(j).array().sign().matrix() * g(0, j);
      } else if (y(0, j) > Scalar(0)) {
        gx.col(j) = xv.col(j) * (g(0, j) / y(0, j));
      } else {
        gx.col(j).setZero();
      }
    }
    t.accumulate(x, gx);
  });
}

// Columns idx of x, in that order (repeats allowed).
template <typename Scalar>
Var<Scalar> select_columns(Var<Scalar> x, std::span<const Index> idx) {
  const auto& xv = x.value();
  Matrix<Scalar> y(xv.rows(), static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] < 0 || idx[j] >= xv.cols()) throw NumericalFault("select_columns: index out of range");
    y.col(static_cast<Index>(j)) = xv.col(idx[j]);
  }
  std::vector<Index> cols(idx.begin(), idx.end());
  return x.tape().record(std::move(y), [x, cols = std::move(cols)](const Matrix<Scalar>& g, Tape<Scalar>& t) {
    for (std::size_t j = 0; j < cols.size(); ++j) t.accumulate_col(x, cols[j], g.col(static_cast<Index>(j)));
  });
}

template <typename Scalar>
Var<Scalar> concat_columns(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw NumericalFault("concat_columns: nothing to concatenate");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw NumericalFault("concat_columns: row mismatch");
    cols += p.cols();
  }
  Matrix<Scalar> y(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var<Scalar>> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(y), [inputs](const Matrix<Scalar>& g, Tape<Scalar>& t) {
    Index at = 0;
    for (const auto& p : inputs) {
      t.accumulate(p, g.middleCols(at, p.cols()));
      at += p.cols();
    }
  });
}

enum class Pooling { Sum, Avg, Max };

// Pools contiguous column segments: segment k is columns
// [offsets[k], offsets[k+1]). Every segment must be nonempty.
template <typename Scalar>
Var<Scalar> segment_pool(Var<Scalar> x, std::span<const Index> offsets, Pooling kind) {
  if (offsets.size() < 1) throw NumericalFault("segment_pool: offsets must have at least one entry");
  const auto& xv = x.value();
  const auto segments = static_cast<Index>(offsets.size() - 1);
  if (offsets.back() != xv.cols()) throw NumericalFault("segment_pool: offsets do not cover the input");
  Matrix<Scalar> y(xv.rows(), segments);
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> argmax;
  if (kind == Pooling::Max) argmax.resize(xv.rows(), segments);
  for (Index k = 0; k < segments; ++k) {
    const Index begin = offsets[static_cast<std::size_t>(k)];
    const Index count = offsets[static_cast<std::size_t>(k) + 1] - begin;
    if (count <= 0) throw NumericalFault("segment_pool: empty segment " + std::to_string(k));
    auto block = xv.middleCols(begin, count);
    switch (kind) {
      case Pooling::Sum:
      case Pooling::Avg:
        // Left to right, so sums are reproducible independent of Eigen's reduction order.
        y.col(k) = block.col(0);
        for (Index c = 1; c < count; ++c) y.col(k) += block.col(c);
        if (kind == Pooling::Avg) y.col(k) /= static_cast<Scalar>(count);
        break;
      case Pooling::Max:
        for (Index r = 0; r < xv.rows(); ++r) {
          Index best = 0;
          y(r, k) = block.row(r).maxCoeff(&best);
          argmax(r, k) = begin + best;
        }
        break;
    }
  }
  std::vector<Index> offs(offsets.begin(), offsets.end());
  return x.tape().record(std::move(y), [x, offs = std::move(offs), kind, argmax = std::move(argmax)](
                                           const Matrix<Scalar>& g, Tape<Scalar>& t) {
    Matrix<Scalar> gx = Matrix<Scalar>::Zero(x.rows(), x.cols());
    for (std::size_t k = 0; k + 1 < offs.size(); ++k) {
      const Index begin = offs[k];
      const Index count = offs[k + 1] - begin;
      const auto kk = static_cast<Index>(k);
      switch (kind) {
        case Pooling::Sum:
          gx.middleCols(begin, count).colwise() = g.col(kk);
          break;
        case Pooling::Avg:
          gx.middleCols(begin, count).colwise() = g.col(kk) / static_cast<Scalar>(count);
          break;
        case Pooling::Max:
          for (Index r = 0; r < gx.rows(); ++r) gx(r, argmax(r, kk)) += g(r, kk);
          break;
      }
    }
    t.accumulate(x, gx);
  });
}

}  // namespace ookb::numerics
