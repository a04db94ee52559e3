#include "dialoglow/tape.hpp"

#include <stdexcept>

namespace dialoglow::ad {

const Tensor& Var::value() const { return tape_->value(id_); }

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Tape::Tape()
#ifdef NDEBUG
    : check_finite_(false)
#else
    : check_finite_(true)
#endif
{
}

Var Tape::push(Node node) {
  if (check_finite_ && !node.value().all_finite()) {
    throw std::domain_error("non-finite value recorded at tape node " + std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(const Tensor& value, Tensor* grad_sink) {
  Node n;
  n.external = &value;
  if (grad_sink != nullptr) {
    if (grad_sink->shape() != value.shape()) {
      throw ShapeError("parameter gradient sink " + to_string(grad_sink->shape()) + " vs value " +
                       to_string(value.shape()));
    }
    n.sink = grad_sink;
    n.requires_grad = true;
  }
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape_ != this) {
      throw std::invalid_argument("operation mixes variables from different tapes");
    }
    n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (n.requires_grad) {
    n.backward = std::move(backward);
  }
  return push(std::move(n));
}

Tensor* Tape::grad_sink(const Var& v) {
  Node& n = nodes_.at(v.id_);
  if (!n.requires_grad) {
    return nullptr;
  }
  if (n.sink != nullptr) {
    return n.sink;
  }
  if (n.grad.empty() && !n.value().empty()) {
    n.grad = Tensor(n.value().shape());
  }
  return &n.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) {
    throw std::invalid_argument("backward: loss is not on this tape");
  }
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + to_string(loss.shape()));
  }
  Tensor* seed = grad_sink(loss);
  if (seed == nullptr) {
    return;
  }
  (*seed)[0] += 1.0;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.empty()) {
      continue;
    }
    n.backward(*this, n.grad);
  }
}

Tensor Tape::grad(const Var& v) const {
  const Node& n = nodes_.at(v.id_);
  if (n.sink != nullptr) {
    return *n.sink;
  }
  if (n.grad.empty()) {
    return Tensor(n.value().shape());
  }
  return n.grad;
}

const Tensor& Tape::value(std::size_t id) const { return nodes_.at(id).value(); }

}  // namespace dialoglow::ad
