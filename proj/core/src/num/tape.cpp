#include "wsda/num/tape.hpp"

#include <algorithm>

#include "wsda/error.hpp"

namespace wsda::num {

Tape& Var::tape() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().value(*this); }

void Tape::check_owned(Var v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = "leaf";
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward, std::string op) {
  bool needs = false;
  for (const Var& p : parents) {
    check_owned(p);
    needs = needs || nodes_[p.id()].needs_grad;
  }
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.backward = std::move(backward);
  n.op = std::move(op);
  n.needs_grad = needs;
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id()].value;
}

const std::string& Tape::op(Var v) const {
  check_owned(v);
  return nodes_[v.id()].op;
}

std::span<const Var> Tape::parents(Var v) const {
  check_owned(v);
  return nodes_[v.id()].parents;
}

void Tape::note_kink(double distance) noexcept { kink_margin_ = std::min(kink_margin_, distance); }

void Tape::backward(Var seed, double seed_scale) {
  check_owned(seed);
  if (nodes_[seed.id()].value.numel() != 1) {
    throw ContractError("backward seed must be a scalar, got shape " +
                        shape_string(nodes_[seed.id()].value.shape()));
  }
  grads_.assign(nodes_.size(), Tensor());
  has_grad_.assign(nodes_.size(), false);

  auto ensure = [&](std::size_t id) -> Tensor* {
    if (!has_grad_[id]) {
      grads_[id] = Tensor(nodes_[id].value.shape(), 0.0);
      has_grad_[id] = true;
    }
    return &grads_[id];
  };

  ensure(seed.id())->data()[0] = seed_scale;

  std::vector<Tensor*> parent_grads;
  for (std::size_t id = seed.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!has_grad_[id] || !node.needs_grad || !node.backward) continue;
    parent_grads.assign(node.parents.size(), nullptr);
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      const std::size_t pid = node.parents[i].id();
      if (nodes_[pid].needs_grad) parent_grads[i] = ensure(pid);
    }
    BackwardContext ctx{*this, node.parents, node.value, grads_[id], parent_grads};
    node.backward(ctx);
  }
}

Tensor Tape::grad(Var v) const {
  check_owned(v);
  if (v.id() < has_grad_.size() && has_grad_[v.id()]) return grads_[v.id()];
  return Tensor(nodes_[v.id()].value.shape(), 0.0);
}

bool Tape::has_grad(Var v) const {
  check_owned(v);
  return v.id() < has_grad_.size() && has_grad_[v.id()];
}

std::vector<Tensor> backward(Tape& tape, Var seed, std::span<const Var> params,
                             double seed_scale) {
  tape.backward(seed, seed_scale);
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Var& p : params) out.push_back(tape.grad(p));
  return out;
}

}  // namespace wsda::num
