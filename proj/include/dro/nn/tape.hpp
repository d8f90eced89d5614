#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "dro/nn/tensor.hpp"

namespace dro::nn {

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad = Tensor::zeros_like(value); }
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of forward operations. backward() walks it in exact reverse
/// order of recording.
class Tape {
 public:
  /// Receives the node's own forward value and its incoming gradient.
  using BackwardFn = std::function<void(Tape&, const Tensor& value, const Tensor& grad)>;

  Var input(Tensor value, bool requires_grad = false);
  /// Leaf bound to `p`; backward() adds this node's gradient into p.grad.
  Var param(Parameter& p);
  /// Used by primitives. The node requires a gradient iff any parent does.
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1; loss must be a single-element node of this tape.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, allocated on first use; nullptr when the node
  /// does not require a gradient.
  Tensor* grad_buffer(std::size_t id);
  /// Gradient after backward(); zeros when nothing flowed into the node.
  Tensor grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  std::deque<Node> nodes_;
};

}  // namespace dro::nn
