#include "dro/nn/tape.hpp"

namespace dro::nn {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::input(Tensor value, bool requires_grad) {
  nodes_.push_back({std::move(value), {}, requires_grad, {}, nullptr});
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  nodes_.push_back({p.value, {}, true, {}, &p});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.tape() != this) throw InputError("operands recorded on different tapes");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back({std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{},
                    nullptr});
  return {this, nodes_.size() - 1};
}

Tensor* Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor::zeros_like(n.value);
  return &n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.grad.empty() ? Tensor::zeros_like(n.value) : n.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw InputError("loss was recorded on a different tape");
  if (loss.value().size() != 1)
    throw InputError("backward expects a scalar loss, got shape " +
                     shape_string(loss.value().shape));
  Tensor* seed = grad_buffer(loss.id());
  if (!seed) return;
  (*seed)[0] += 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.value, n.grad);
    if (n.param) {
      if (n.param->grad.empty()) n.param->grad = Tensor::zeros_like(n.param->value);
      for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
    }
  }
}

}  // namespace dro::nn
