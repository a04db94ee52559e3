#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>

#include "dialoglow/tensor.hpp"

namespace dialoglow::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records operations in execution order; backward() walks them in reverse.
// A tape belongs to one thread of execution.
class Tape {
 public:
  /// Receives the gradient of the node's output; accumulates into its inputs
  /// via grad_sink().
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Owned leaf that requires a gradient.
  Var variable(Tensor value);
  /// Leaf that references an external tensor without copying it. When
  /// `grad_sink` is non-null gradients accumulate there; otherwise the leaf
  /// is a constant. Both tensors must outlive the tape.
  Var parameter(const Tensor& value, Tensor* grad_sink);

  /// Appends an operation output. It requires a gradient iff some input does.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
  }

  /// Gradient buffer of `v` (zero-initialized on first use), or nullptr when
  /// `v` does not require a gradient.
  Tensor* grad_sink(const Var& v);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every upstream node once.
  /// Throws ShapeError when `loss` is not a single element.
  void backward(const Var& loss);

  /// Accumulated gradient (zeros when none reached the node).
  Tensor grad(const Var& v) const;

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Set by stochastic operations such as train-mode dropout.
  void mark_stochastic() { stochastic_ = true; }
  bool stochastic() const { return stochastic_; }

  /// When enabled, every recorded value is checked for NaN/Inf.
  void set_check_finite(bool on) { check_finite_ = on; }
  bool check_finite() const { return check_finite_; }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    Tensor* sink = nullptr;
    bool requires_grad = false;
    BackwardFn backward;

    const Tensor& value() const { return external != nullptr ? *external : owned; }
  };

  Var push(Node node);

  std::deque<Node> nodes_;  // deque: references stay valid while recording
  bool stochastic_ = false;
  bool check_finite_;
};

}  // namespace dialoglow::ad
