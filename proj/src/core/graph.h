#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "core/tensor.h"

namespace dgad {

// Tape-based reverse-mode autodiff.  Each op eagerly computes its value
// and records a closure that pushes the node's gradient into its
// parents.  Graphs are rebuilt every step (define-by-run).

class Node;
using NodePtr = std::shared_ptr<Node>;

class Node {
 public:
  Tensor value;
  Tensor grad;  // lazily allocated; empty means "all zeros so far"
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;  // unset on leaves

  // Zero-allocates grad on first use.
  Tensor& ensure_grad();
  void accumulate(const Tensor& delta);
};

// Lightweight handle; copying shares the node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  static Var leaf(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  Tensor& grad() { return node_->ensure_grad(); }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }
  void zero_grad() { node_->grad = Tensor(); }
  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

// Thread-local gradient-recording switch; NoGrad disables taping for
// inference so forwards allocate no graph.
bool grad_enabled();

class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  bool prev_;
};

// Builds an op node.  Records parents and the backward closure only
// when taping is on and some parent needs gradients; otherwise the
// result is a detached constant and upstream graph memory can free.
Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

// Reverse pass from a scalar root.  Accumulates into .grad of every
// reachable node with requires_grad, leaves included.
void backward(const Var& root);

}  // namespace dgad
