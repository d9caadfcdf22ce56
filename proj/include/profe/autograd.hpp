#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "profe/ops.hpp"
#include "profe/tensor.hpp"

namespace profe {

// Reverse-mode autograd over Tensors. Each forward op allocates a graph
// node holding its output value and a closure that pushes the incoming
// gradient to its parents. Parameters are long-lived nodes whose values
// are updated in place by the optimizer; everything else is rebuilt per
// forward pass.

struct GraphNode;
using Var = std::shared_ptr<GraphNode>;

struct GraphNode {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool grad_ready = false;     // set by backward() on parameter nodes
  bool backward_done = false;  // set on the node backward() was run from
  std::vector<Var> parents;
  std::function<void(GraphNode&)> backprop;
};

Var make_constant(Tensor t);
Var make_parameter(Tensor t);

inline const Tensor& val(const Var& v) { return v->value; }

Var matmul(const Var& a, const Var& w);
Var add_row(const Var& x, const Var& bias);  // bias broadcast over rows
Var relu(const Var& x);
Var log_softmax_T(const Var& x, float T);
Var softmax_T(const Var& x, float T);

// Scalar outputs (shape {1}).
Var cross_entropy(const Var& logits, const LabelBatch& labels);
Var kl_div_const_target(const Tensor& p_t, const Var& log_p_s);
Var mse_const(const Var& a, const Tensor& b);
// Per-row MSE against per-row target vectors, averaged over rows with
// mask set; rows with mask clear contribute nothing. Zero if no row is
// masked in.
Var masked_row_mse(const Var& x, const Tensor& targets,
                   const std::vector<char>& mask);

Var add(const Var& a, const Var& b);  // same-shape elementwise add
Var scale(const Var& a, float s);

// Seeds the gradient of `root` (a scalar) with 1 and propagates through
// the recorded graph. Gradients of all reachable nodes are reset first.
// Throws StateError if called twice on the same root.
void backward(const Var& root);

}  // namespace profe
