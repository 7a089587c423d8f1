#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wsda/num/tensor.hpp"

namespace wsda::num {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; it and any reference
/// returned by value() stay valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const;
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Arguments handed to a node's backward rule.
///
/// `parent_grads[i]` is null when parent i does not need a gradient; otherwise
/// the rule accumulates (+=) its contribution into it.
struct BackwardContext {
  const Tape& tape;
  std::span<const Var> parents;
  const Tensor& value;
  const Tensor& upstream;
  std::span<Tensor* const> parent_grads;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

/// Reverse-mode autodiff record for one forward evaluation.
///
/// Nodes are appended in evaluation order, so the record is always a valid
/// topological order. A tape is single-writer; use one per training step.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input. Gradients are tracked regardless of the tensor flag.
  Var leaf(Tensor value);
  /// Non-differentiable input.
  Var constant(Tensor value);
  /// Appends an op node. Parents must already live on this tape.
  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward, std::string op);

  const Tensor& value(Var v) const;
  const std::string& op(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  std::span<const Var> parents(Var v) const;

  /// Reverse accumulation from a single-element seed, scaled by `seed_scale`.
  void backward(Var seed, double seed_scale = 1.0);
  /// Gradient of the last backward() with respect to v; zeros if v was unreached.
  Tensor grad(Var v) const;
  bool has_grad(Var v) const;

  /// Smallest observed distance of any relu input to 0 or of a max reduction
  /// to its runner-up. Gradient checks near such points are meaningless.
  double kink_margin() const noexcept { return kink_margin_; }
  void note_kink(double distance) noexcept;

 private:
  struct Node {
    Tensor value;
    std::vector<Var> parents;
    BackwardFn backward;
    std::string op;
    bool needs_grad = false;
  };

  Var push(Node node);
  void check_owned(Var v) const;

  std::deque<Node> nodes_;  // stable addresses: value() references survive appends
  std::vector<Tensor> grads_;
  std::vector<bool> has_grad_;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

/// Runs backward from `seed` and returns one gradient per entry of `params`
/// (zero tensors for parameters the seed does not depend on).
std::vector<Tensor> backward(Tape& tape, Var seed, std::span<const Var> params,
                             double seed_scale = 1.0);

}  // namespace wsda::num
