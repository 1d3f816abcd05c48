#include "distag/autodiff.hpp"

#include <string>

#include "distag/errors.hpp"

namespace distag {

const Tensor& Var::value() const { return tape_->value(*this); }
bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& param) {
  Node n;
  n.param = &param;
  n.requires_grad = !param.frozen;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const auto& in : inputs) {
    if (in.tape_ != this) throw TapeError("op inputs recorded on a different tape");
    if (requires_grad(in)) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tape::Node& Tape::node(const Var& v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw TapeError("stale or foreign Var");
  return nodes_[v.id_];
}

Tape::Node& Tape::node(const Var& v) {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw TapeError("stale or foreign Var");
  return nodes_[v.id_];
}

const Tensor& Tape::value(const Var& v) const {
  const auto& n = node(v);
  return n.param ? n.param->value : n.value;
}

bool Tape::requires_grad(const Var& v) const { return node(v).requires_grad; }

Tensor& Tape::grad(const Var& v) {
  auto& n = node(v);
  if (n.param) return n.param->grad;
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (used_) throw TapeError("backward called twice on the same tape; reset() it first");
  const auto& out = value(loss);
  if (out.size() != 1) {
    throw TapeError("backward needs a scalar loss, got shape " + shape_string(out.shape()));
  }
  used_ = true;
  if (!requires_grad(loss)) return;

  auto& seed = node(loss);
  if (seed.param) {
    seed.param->grad[0] += 1.0;
    return;
  }
  seed.grad = Tensor(seed.value.shape(), 1.0);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

void Tape::reset() {
  nodes_.clear();
  used_ = false;
}

}  // namespace distag
