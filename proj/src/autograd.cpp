#include "profe/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace profe {

Var make_constant(Tensor t) {
  auto n = std::make_shared<GraphNode>();
  n->value = std::move(t);
  return n;
}

Var make_parameter(Tensor t) {
  auto n = std::make_shared<GraphNode>();
  n->value = std::move(t);
  n->requires_grad = true;
  return n;
}

namespace {

Var make_op(Tensor value, std::vector<Var> parents,
            std::function<void(GraphNode&)> backprop) {
  auto n = std::make_shared<GraphNode>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const Var& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backprop = std::move(backprop);
  return n;
}

Var make_scalar_op(float value, std::vector<Var> parents,
                   std::function<void(GraphNode&)> backprop) {
  return make_op(Tensor({1}, {value}), std::move(parents),
                 std::move(backprop));
}

}  // namespace

Var matmul(const Var& a, const Var& w) {
  Tensor out = ops::matmul(a->value, w->value);
  return make_op(std::move(out), {a, w}, [](GraphNode& n) {
    GraphNode& a = *n.parents[0];
    GraphNode& w = *n.parents[1];
    const std::size_t B = a.value.rows(), K = a.value.cols(),
                      C = w.value.shape[1];
    if (a.requires_grad) {
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          float acc = 0.0f;
          for (std::size_t j = 0; j < C; ++j)
            acc += n.grad.v[i * C + j] * w.value.v[k * C + j];
          a.grad.v[i * K + k] += acc;
        }
    }
    if (w.requires_grad) {
      for (std::size_t i = 0; i < B; ++i) {
        const float* arow = &a.value.v[i * K];
        const float* grow = &n.grad.v[i * C];
        for (std::size_t k = 0; k < K; ++k) {
          const float aik = arow[k];
          if (aik == 0.0f) continue;
          float* wgrow = &w.grad.v[k * C];
          for (std::size_t j = 0; j < C; ++j) wgrow[j] += aik * grow[j];
        }
      }
    }
  });
}

Var add_row(const Var& x, const Var& bias) {
  const Tensor& xv = x->value;
  const Tensor& bv = bias->value;
  if (bv.numel() != xv.cols())
    throw DimensionError("add_row: bias width " + std::to_string(bv.numel()) +
                         " != input width " + std::to_string(xv.cols()));
  Tensor out = xv;
  const std::size_t B = xv.rows(), C = xv.cols();
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < C; ++j) out.v[i * C + j] += bv.v[j];
  return make_op(std::move(out), {x, bias}, [](GraphNode& n) {
    GraphNode& x = *n.parents[0];
    GraphNode& b = *n.parents[1];
    const std::size_t B = x.value.rows(), C = x.value.cols();
    if (x.requires_grad)
      for (std::size_t i = 0; i < n.grad.numel(); ++i)
        x.grad.v[i] += n.grad.v[i];
    if (b.requires_grad)
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < C; ++j) b.grad.v[j] += n.grad.v[i * C + j];
  });
}

Var relu(const Var& x) {
  Tensor out = x->value;
  for (float& f : out.v) f = f > 0.0f ? f : 0.0f;
  return make_op(std::move(out), {x}, [](GraphNode& n) {
    GraphNode& x = *n.parents[0];
    if (!x.requires_grad) return;
    for (std::size_t i = 0; i < x.value.numel(); ++i)
      if (x.value.v[i] > 0.0f) x.grad.v[i] += n.grad.v[i];
  });
}

Var log_softmax_T(const Var& x, float T) {
  Tensor out = ops::log_softmax_T(x->value, T);
  return make_op(std::move(out), {x}, [T](GraphNode& n) {
    GraphNode& x = *n.parents[0];
    if (!x.requires_grad) return;
    const std::size_t B = n.value.rows(), C = n.value.cols();
    for (std::size_t r = 0; r < B; ++r) {
      float gsum = 0.0f;
      for (std::size_t c = 0; c < C; ++c) gsum += n.grad.v[r * C + c];
      for (std::size_t c = 0; c < C; ++c) {
        float s = std::exp(n.value.v[r * C + c]);
        x.grad.v[r * C + c] += (n.grad.v[r * C + c] - s * gsum) / T;
      }
    }
  });
}

Var softmax_T(const Var& x, float T) {
  Tensor out = ops::softmax_T(x->value, T);
  return make_op(std::move(out), {x}, [T](GraphNode& n) {
    GraphNode& x = *n.parents[0];
    if (!x.requires_grad) return;
    const std::size_t B = n.value.rows(), C = n.value.cols();
    for (std::size_t r = 0; r < B; ++r) {
      float dot = 0.0f;
      for (std::size_t c = 0; c < C; ++c)
        dot += n.grad.v[r * C + c] * n.value.v[r * C + c];
      for (std::size_t c = 0; c < C; ++c)
        x.grad.v[r * C + c] +=
            n.value.v[r * C + c] * (n.grad.v[r * C + c] - dot) / T;
    }
  });
}

Var cross_entropy(const Var& logits, const LabelBatch& labels) {
  float loss = ops::cross_entropy(logits->value, labels);
  LabelBatch lb = labels;
  return make_scalar_op(loss, {logits}, [lb](GraphNode& n) {
    GraphNode& x = *n.parents[0];
    if (!x.requires_grad) return;
    const std::size_t B = x.value.rows(), C = x.value.cols();
    Tensor sm = ops::softmax_T(x.value, 1.0f);
    const float g = n.grad.v[0] / static_cast<float>(B);
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        float target = (static_cast<std::size_t>(lb.labels[r]) == c) ? 1.0f
                                                                     : 0.0f;
        x.grad.v[r * C + c] += g * (sm.v[r * C + c] - target);
      }
  });
}

Var kl_div_const_target(const Tensor& p_t, const Var& log_p_s) {
  float loss = ops::kl_div(p_t, log_p_s->value);
  Tensor target = p_t;
  return make_scalar_op(loss, {log_p_s}, [target](GraphNode& n) {
    GraphNode& x = *n.parents[0];
    if (!x.requires_grad) return;
    const float g = n.grad.v[0] / static_cast<float>(x.value.rows());
    for (std::size_t i = 0; i < x.value.numel(); ++i)
      x.grad.v[i] -= g * target.v[i];
  });
}

Var mse_const(const Var& a, const Tensor& b) {
  float loss = ops::mse(a->value, b);
  Tensor target = b;
  return make_scalar_op(loss, {a}, [target](GraphNode& n) {
    GraphNode& x = *n.parents[0];
    if (!x.requires_grad) return;
    const float g = 2.0f * n.grad.v[0] / static_cast<float>(x.value.numel());
    for (std::size_t i = 0; i < x.value.numel(); ++i)
      x.grad.v[i] += g * (x.value.v[i] - target.v[i]);
  });
}

Var masked_row_mse(const Var& x, const Tensor& targets,
                   const std::vector<char>& mask) {
  const Tensor& xv = x->value;
  require_same_shape(xv, targets, "masked_row_mse");
  const std::size_t B = xv.rows(), D = xv.cols();
  if (mask.size() != B)
    throw DimensionError("masked_row_mse: mask size mismatch");
  std::size_t m = 0;
  float total = 0.0f;
  for (std::size_t r = 0; r < B; ++r) {
    if (!mask[r]) continue;
    ++m;
    for (std::size_t c = 0; c < D; ++c) {
      float d = xv.v[r * D + c] - targets.v[r * D + c];
      total += d * d;
    }
  }
  float loss = m ? total / static_cast<float>(m * D) : 0.0f;
  Tensor tgt = targets;
  std::vector<char> msk = mask;
  return make_scalar_op(loss, {x}, [tgt, msk, m](GraphNode& n) {
    GraphNode& x = *n.parents[0];
    if (!x.requires_grad || m == 0) return;
    const std::size_t B = x.value.rows(), D = x.value.cols();
    const float g = 2.0f * n.grad.v[0] / static_cast<float>(m * D);
    for (std::size_t r = 0; r < B; ++r) {
      if (!msk[r]) continue;
      for (std::size_t c = 0; c < D; ++c)
        x.grad.v[r * D + c] += g * (x.value.v[r * D + c] - tgt.v[r * D + c]);
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "add");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] += b->value.v[i];
  return make_op(std::move(out), {a, b}, [](GraphNode& n) {
    for (auto& p : n.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < n.grad.numel(); ++i)
        p->grad.v[i] += n.grad.v[i];
    }
  });
}

Var scale(const Var& a, float s) {
  Tensor out = a->value;
  for (float& f : out.v) f *= s;
  return make_op(std::move(out), {a}, [s](GraphNode& n) {
    GraphNode& x = *n.parents[0];
    if (!x.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      x.grad.v[i] += s * n.grad.v[i];
  });
}

void backward(const Var& root) {
  if (root->backward_done)
    throw StateError("backward called twice on the same graph; re-run the "
                     "forward pass first");
  if (root->value.numel() != 1)
    throw StateError("backward requires a scalar loss");
  // Topological order via iterative post-order DFS on parents.
  std::vector<GraphNode*> topo;
  std::unordered_set<GraphNode*> seen;
  std::vector<std::pair<GraphNode*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      GraphNode* p = node->parents[idx++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  for (GraphNode* n : topo) {
    n->grad = Tensor(n->value.shape);
    n->grad_ready = false;
  }
  root->grad.v[0] = 1.0f;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
  for (GraphNode* n : topo)
    if (n->requires_grad) n->grad_ready = true;
  root->backward_done = true;
}

}  // namespace profe
