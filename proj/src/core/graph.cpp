#include "core/graph.h"

#include <unordered_set>

namespace dgad {

Tensor& Node::ensure_grad() {
  if (grad.empty() && value.numel() > 0) grad = Tensor::zeros_like(value);
  return grad;
}

void Node::accumulate(const Tensor& delta) {
  Tensor& g = ensure_grad();
  if (!g.same_shape(delta)) fail("gradient shape mismatch: " + g.shape_str() + " vs " + delta.shape_str());
  double* gp = g.data();
  const double* dp = delta.data();
  for (int64_t i = 0; i < delta.numel(); ++i) gp[i] += dp[i];
}

Var Var::leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGrad::NoGrad() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGrad::~NoGrad() { g_grad_enabled = prev_; }

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& p : parents) {
      if (p.defined() && p.node()->requires_grad) {
        any = true;
        break;
      }
    }
    if (any) {
      n->requires_grad = true;
      n->parents.reserve(parents.size());
      for (const Var& p : parents) n->parents.push_back(p.node());
      n->backward_fn = std::move(backward_fn);
    }
  }
  return Var(std::move(n));
}

void backward(const Var& root) {
  if (!root.defined()) fail("backward on undefined var");
  Node* r = root.node().get();
  if (r->value.numel() != 1) fail("backward requires a scalar root, got " + r->value.shape_str());
  if (!r->requires_grad) fail("backward on a graph with no gradient-requiring inputs");

  // Iterative post-order DFS; reversed it yields a valid topological
  // order.  Parent visit order is the op registration order, so float
  // accumulation order (and thus every bit of the result) is stable.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(r, 0);
  visited.insert(r);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  r->ensure_grad();
  r->grad.fill(1.0);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

}  // namespace dgad
