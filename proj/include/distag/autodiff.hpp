#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "distag/parameter.hpp"
#include "distag/tensor.hpp"

namespace distag {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid until the tape
// is reset or destroyed.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
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

// Dynamic reverse-mode tape. Ops append nodes during the forward pass;
// backward() walks them in reverse and accumulates gradients into the
// Parameters that were registered with parameter(). A tape supports one
// backward pass; reset() clears it for reuse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a parameter: reads its value in place, accumulates into
  // its grad. Frozen parameters are recorded as constants.
  Var parameter(Parameter& param);

  void backward(Var loss);
  void reset();
  std::size_t size() const { return nodes_.size(); }
  bool used() const { return used_; }

  // Op-author interface.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  const Tensor& value(const Var& v) const;
  bool requires_grad(const Var& v) const;
  // Gradient accumulator for v; allocated on first use. Only valid during
  // backward() for nodes that require grad.
  Tensor& grad(const Var& v);

 private:
  struct Node {
    Tensor value;
    Parameter* param = nullptr;
    bool requires_grad = false;
    Tensor grad;
    BackwardFn backward;
  };

  const Node& node(const Var& v) const;
  Node& node(const Var& v);

  std::deque<Node> nodes_;
  bool used_ = false;
};

}  // namespace distag
