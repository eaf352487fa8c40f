#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "tacdepth/autodiff/tensor.hpp"
#include "tacdepth/error.hpp"

namespace tacdepth::ad {

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool defined() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Append-only record of a forward computation. Nodes are created in
/// evaluation order, so reverse creation order is a valid topological
/// order for the backward sweep.
///
/// A tape is not thread-safe; use one tape per thread.
class Tape {
 public:
  /// Accumulates into the gradients of the node's inputs given the node's
  /// own (complete) gradient.
  using BackwardFn = std::function<void(Tape&, int self)>;

  Var constant(Tensor value) { return push(std::move(value), {}, nullptr, false); }

  /// Leaf whose gradient is collected by backward().
  Var parameter(Tensor value) { return push(std::move(value), {}, nullptr, true); }

  /// Records an operation. The node requires a gradient iff any input does;
  /// the backward function is dropped otherwise.
  Var record(Tensor value, std::vector<int> inputs, BackwardFn backward) {
    bool needs = false;
    for (int i : inputs) needs = needs || nodes_.at(static_cast<std::size_t>(i)).requires_grad;
    return push(std::move(value), std::move(inputs), needs ? std::move(backward) : nullptr, needs);
  }

  const Tensor& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  const Tensor& value(Var v) const { return value(v.id); }
  bool requires_grad(int id) const { return nodes_.at(static_cast<std::size_t>(id)).requires_grad; }
  const std::vector<int>& inputs(int id) const { return nodes_.at(static_cast<std::size_t>(id)).inputs; }

  /// Gradient of the last backward() loss w.r.t. the node; zeros when the
  /// node was unreachable. Only leaves and the loss keep their gradient,
  /// interior gradients are released during the sweep.
  Tensor grad(Var v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    return n.has_grad ? n.grad : Tensor(n.value.shape());
  }

  /// Mutable gradient buffer, allocated as zeros on first use.
  Tensor& grad_buffer(int id) {
    Node& n = nodes_.at(static_cast<std::size_t>(id));
    if (!n.has_grad) {
      n.grad = Tensor(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  void backward(Var loss) {
    if (loss.tape != this) throw DomainError("backward: variable belongs to another tape");
    if (value(loss).size() != 1) throw ShapeError("backward: loss must be a scalar, got " + to_string(value(loss).shape()));
    for (auto& n : nodes_) {
      n.has_grad = false;
      n.grad = Tensor();
    }
    grad_buffer(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.has_grad || !n.backward) continue;
      n.backward(*this, id);
      if (!n.inputs.empty() && id != loss.id) {
        // Interior gradients are no longer needed once propagated.
        nodes_[static_cast<std::size_t>(id)].grad = Tensor();
        nodes_[static_cast<std::size_t>(id)].has_grad = false;
      }
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<int> inputs;
    BackwardFn backward;
  };

  Var push(Tensor value, std::vector<int> inputs, BackwardFn fn, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

}  // namespace tacdepth::ad
